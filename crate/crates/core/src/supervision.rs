//! Ground-truth targets built from point annotations.
//!
//! * Localization heatmap: full resolution, one truncated Gaussian per head
//!   with a k-nearest-neighbour bandwidth, overlaps composed by maximum.
//! * Counting density: at the counting stride, one unit-mass Gaussian per
//!   head with a fixed bandwidth, contributions summed.

use serde::{Deserialize, Serialize};

use crate::annotation::{ImageRecord, PointAnnotation};
use crate::error::{Error, Result};
use crate::grid::DenseGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisionConfig {
    /// Density kernel bandwidth, in output (strided) pixels.
    pub sigma_c: f64,
    /// Number of neighbours used for the adaptive heatmap bandwidth.
    pub knn_k: usize,
    pub sigma_coeff: f64,
    /// Lower bound on the adaptive bandwidth (isolated or coincident heads).
    pub sigma_d_min: f64,
    /// Kernels are exactly zero beyond this many standard deviations.
    pub truncate_radius_sigmas: f64,
    pub density_stride: usize,
}

impl Default for SupervisionConfig {
    fn default() -> Self {
        Self {
            sigma_c: 3.0,
            knn_k: 3,
            sigma_coeff: 0.1,
            sigma_d_min: 1.0,
            truncate_radius_sigmas: 3.0,
            density_stride: 2,
        }
    }
}

impl SupervisionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_c", self.sigma_c),
            ("sigma_coeff", self.sigma_coeff),
            ("sigma_d_min", self.sigma_d_min),
            ("truncate_radius_sigmas", self.truncate_radius_sigmas),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be >= 1".into()));
        }
        if self.density_stride == 0 {
            return Err(Error::Config("density_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn density_shape(&self, height: usize, width: usize) -> (usize, usize) {
        (
            height.div_ceil(self.density_stride),
            width.div_ceil(self.density_stride),
        )
    }
}

/// Bandwidth for head `index`: `sigma_coeff` times the summed distance to its
/// `knn_k` nearest other heads (fewer if unavailable), floored at `sigma_d_min`.
pub fn adaptive_sigma(points: &[PointAnnotation], index: usize, cfg: &SupervisionConfig) -> Result<f64> {
    let me = points.get(index).ok_or_else(|| {
        Error::InvalidArgument(format!("head index {index} out of range ({} heads)", points.len()))
    })?;
    let mut dists: Vec<f64> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, p)| me.distance_to(p.x, p.y))
        .collect();
    if dists.is_empty() {
        return Ok(cfg.sigma_d_min);
    }
    let k = cfg.knn_k.min(dists.len());
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    dists[..k].sort_by(f64::total_cmp);
    let raw = cfg.sigma_coeff * dists[..k].iter().sum::<f64>();
    Ok(raw.max(cfg.sigma_d_min))
}

/// Nearest pixel to a continuous coordinate, clamped into `[0, len)`.
fn nearest_pixel(v: f64, len: usize) -> usize {
    (v.round().max(0.0) as usize).min(len - 1)
}

/// Pixel range covered by a kernel centered at `c` with the given radius.
fn support(c: f64, radius: f64, len: usize) -> Option<(usize, usize)> {
    let lo = (c - radius).ceil().max(0.0);
    let hi = (c + radius).floor().min(len as f64 - 1.0);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

/// Writes one head's truncated Gaussian into `grid` by per-pixel maximum.
/// The kernel is centered on the head's nearest pixel, which therefore
/// receives exactly 1.
pub fn splat_heatmap_peak(grid: &mut DenseGrid, cx: f64, cy: f64, sigma: f64, truncate: f64) {
    let (h, w) = grid.shape();
    let px = nearest_pixel(cx, w) as f64;
    let py = nearest_pixel(cy, h) as f64;
    let radius = truncate * sigma;
    let r2 = radius * radius;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let (Some((x0, x1)), Some((y0, y1))) = (support(px, radius, w), support(py, radius, h)) else {
        return;
    };
    for y in y0..=y1 {
        let dy = y as f64 - py;
        for x in x0..=x1 {
            let dx = x as f64 - px;
            let d2 = dx * dx + dy * dy;
            if d2 > r2 {
                continue;
            }
            let v = (-d2 * inv).exp();
            let i = grid.index(x, y);
            let cell = &mut grid.values_mut()[i];
            if v > *cell {
                *cell = v;
            }
        }
    }
}

pub fn make_heatmap(record: &ImageRecord, cfg: &SupervisionConfig) -> Result<DenseGrid> {
    record.validate()?;
    cfg.validate()?;
    let mut grid = DenseGrid::zeros(record.height, record.width);
    for (i, p) in record.points.iter().enumerate() {
        let sigma = adaptive_sigma(&record.points, i, cfg)?;
        splat_heatmap_peak(&mut grid, p.x, p.y, sigma, cfg.truncate_radius_sigmas);
    }
    Ok(grid)
}

/// Adds a unit-mass Gaussian at continuous position `(cx, cy)` (grid units).
/// The kernel is truncated at `truncate * sigma` and at the grid border, then
/// divided by its own pixel sum.
pub fn splat_unit_mass(grid: &mut DenseGrid, cx: f64, cy: f64, sigma: f64, truncate: f64) {
    let (h, w) = grid.shape();
    let radius = truncate * sigma;
    let r2 = radius * radius;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let footprint = support(cx, radius, w).zip(support(cy, radius, h));
    let mut taps: Vec<(usize, f64)> = Vec::new();
    if let Some(((x0, x1), (y0, y1))) = footprint {
        for y in y0..=y1 {
            let dy = y as f64 - cy;
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let d2 = dx * dx + dy * dy;
                if d2 <= r2 {
                    taps.push((grid.index(x, y), (-d2 * inv).exp()));
                }
            }
        }
    }
    let total: f64 = taps.iter().map(|t| t.1).sum();
    if taps.is_empty() || total <= 0.0 {
        // Radius smaller than the distance to any pixel center: all mass on
        // the nearest pixel.
        let i = grid.index(nearest_pixel(cx, w), nearest_pixel(cy, h));
        grid.values_mut()[i] += 1.0;
        return;
    }
    let values = grid.values_mut();
    for (i, v) in taps {
        values[i] += v / total;
    }
}

pub fn make_density(record: &ImageRecord, cfg: &SupervisionConfig) -> Result<DenseGrid> {
    record.validate()?;
    cfg.validate()?;
    let (dh, dw) = cfg.density_shape(record.height, record.width);
    let mut grid = DenseGrid::zeros(dh, dw);
    let s = cfg.density_stride as f64;
    for p in &record.points {
        splat_unit_mass(&mut grid, p.x / s, p.y / s, cfg.sigma_c, cfg.truncate_radius_sigmas);
    }
    Ok(grid)
}
