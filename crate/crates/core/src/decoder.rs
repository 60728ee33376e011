//! Peak decoding of localization heatmaps and counting from density maps.

use serde::{Deserialize, Serialize};

use crate::annotation::ImageRecord;
use crate::error::{Error, Result};
use crate::grid::DenseGrid;
use crate::metrics::{self, MatchMode, Tally};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: usize,
    pub y: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub threshold: f64,
    pub search_lo: f64,
    pub search_hi: f64,
    pub search_step: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.4,
            search_lo: 0.3,
            search_hi: 0.5,
            search_step: 0.01,
        }
    }
}

impl DecodeConfig {
    pub fn with_threshold(self, threshold: f64) -> Self {
        Self { threshold, ..self }
    }

    /// Candidate thresholds from `search_lo` to `search_hi`, both inclusive.
    pub fn search_grid(&self) -> Result<Vec<f64>> {
        if !(self.search_lo <= self.search_hi) || !(self.search_step > 0.0) {
            return Err(Error::Config(format!(
                "invalid threshold search [{}, {}] step {}",
                self.search_lo, self.search_hi, self.search_step
            )));
        }
        let span = self.search_hi - self.search_lo;
        // Snap to the nearest whole number of steps so that 0.3..0.5 by 0.01
        // yields 21 values despite binary rounding.
        let n = (span / self.search_step + 1e-9).floor() as usize;
        if n == 0 {
            return Ok(vec![self.search_lo]);
        }
        let mut grid: Vec<f64> = (0..=n)
            .map(|i| self.search_lo + i as f64 * self.search_step)
            .collect();
        let last = grid.last_mut().unwrap();
        if (*last - self.search_hi).abs() < 1e-9 * self.search_step.max(1.0) {
            *last = self.search_hi;
        }
        Ok(grid)
    }
}

/// Local maxima of the 3x3 neighbourhood (clipped at the borders).
///
/// Connected plateaus (4-connectivity) of equal-valued maxima are reported
/// once, at their first pixel in row-major order. Output is in row-major order.
pub fn local_peaks(heatmap: &DenseGrid) -> Vec<Detection> {
    let (h, w) = heatmap.shape();
    let v = heatmap.values();
    let mut is_max = vec![false; h * w];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let c = v[y * w + x];
            is_max[y * w + x] = (y0..=y1).all(|yy| (x0..=x1).all(|xx| v[yy * w + xx] <= c));
        }
    }

    // Flood-fill each plateau from its row-major-first pixel.
    let mut seen = vec![false; h * w];
    let mut peaks = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !is_max[start] || seen[start] {
            continue;
        }
        let value = v[start];
        peaks.push(Detection {
            x: start % w,
            y: start / w,
            confidence: value,
        });
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !seen[j] && is_max[j] && v[j] == value {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
    }
    peaks
}

/// Keeps peaks with confidence `>= threshold`, highest first (ties in
/// row-major order).
pub fn filter_peaks(peaks: &[Detection], threshold: f64) -> Vec<Detection> {
    let mut out: Vec<Detection> = peaks
        .iter()
        .filter(|d| d.confidence >= threshold)
        .copied()
        .collect();
    // Stable sort keeps the row-major input order among ties.
    out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    out
}

pub fn decode(heatmap: &DenseGrid, cfg: &DecodeConfig) -> Vec<Detection> {
    filter_peaks(&local_peaks(heatmap), cfg.threshold)
}

pub fn count_from_density(density: &DenseGrid) -> f64 {
    density.sum()
}

/// Picks the grid threshold with the best micro-averaged F1 over the
/// validation set under `mode`. Ties go to the larger threshold.
pub fn search_threshold(
    val_set: &[(DenseGrid, ImageRecord)],
    cfg: &DecodeConfig,
    mode: MatchMode,
) -> Result<f64> {
    if val_set.is_empty() {
        return Err(Error::InvalidArgument("empty validation set".into()));
    }
    let grid = cfg.search_grid()?;
    let peaks: Vec<Vec<Detection>> = val_set.iter().map(|(h, _)| local_peaks(h)).collect();
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &tau in &grid {
        let mut tally = Tally::default();
        for (cands, (_, record)) in peaks.iter().zip(val_set) {
            let dets = filter_peaks(cands, tau);
            tally += metrics::match_points(&dets, &record.points, mode)?.tally();
        }
        let f1 = tally.scores().f1;
        if f1 >= best.0 {
            best = (f1, tau);
        }
    }
    Ok(best.1)
}

/// One line of a detections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionsLine {
    pub id: String,
    /// `[x, y, confidence]` triples.
    pub points: Vec<(usize, usize, f64)>,
}

impl DetectionsLine {
    pub fn new(id: impl Into<String>, dets: &[Detection]) -> Self {
        Self {
            id: id.into(),
            points: dets.iter().map(|d| (d.x, d.y, d.confidence)).collect(),
        }
    }

    pub fn detections(&self) -> Vec<Detection> {
        self.points
            .iter()
            .map(|&(x, y, confidence)| Detection { x, y, confidence })
            .collect()
    }
}

pub fn write_detections_jsonl(lines: &[DetectionsLine]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(l).expect("detections serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_detections_jsonl(text: &str) -> Result<Vec<DetectionsLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                path: "<detections>".into(),
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            })
        })
        .collect()
}
