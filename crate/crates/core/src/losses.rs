//! Training losses with analytic gradients with respect to the prediction.
//!
//! * [`nsf_loss`]: negative-suppressed focal loss on the localization heatmap.
//! * [`fp_loss`]: focal penalty restricted to the false-positive region
//!   (background pixels predicted above [`LossConfig::fp_region_thresh`]).
//! * [`mse_loss`]: density-map regression.
//!
//! Probabilities are clamped to `[prob_eps, 1 - prob_eps]` before any
//! logarithm; clamped pixels receive zero gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DenseGrid;

/// Down-weight on the background branch of the focal loss.
pub const NEG_WEIGHT: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma: f64,
    pub delta: f64,
    pub fp_region_thresh: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub prob_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            delta: 4.0,
            fp_region_thresh: 0.1,
            lambda1: 1.0,
            lambda2: 1000.0,
            prob_eps: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn neg_weight(&self) -> f64 {
        NEG_WEIGHT
    }

    pub fn validate(&self) -> Result<()> {
        let non_neg = [
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ];
        for (name, v) in non_neg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.fp_region_thresh > 0.0 && self.fp_region_thresh < 1.0) {
            return Err(Error::Config(format!(
                "fp_region_thresh must be in (0, 1), got {}",
                self.fp_region_thresh
            )));
        }
        if !(self.prob_eps > 0.0 && self.prob_eps < 0.5) {
            return Err(Error::Config(format!(
                "prob_eps must be in (0, 0.5), got {}",
                self.prob_eps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: DenseGrid,
}

impl LossResult {
    fn zero(shape: (usize, usize)) -> Self {
        Self {
            value: 0.0,
            grad: DenseGrid::zeros(shape.0, shape.1),
        }
    }
}

/// `base^exp`, exact for small integer exponents.
#[inline]
fn pow(base: f64, exp: f64) -> f64 {
    if exp == exp.trunc() && exp.abs() <= 16.0 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

/// Clamped probability and whether the clamp was inactive.
#[inline]
fn clamp_prob(p: f64, eps: f64) -> (f64, bool) {
    if p < eps {
        (eps, false)
    } else if p > 1.0 - eps {
        (1.0 - eps, false)
    } else {
        (p, true)
    }
}

/// `(1-q)^g log q` and its derivative in `q`.
#[inline]
fn positive_term(q: f64, g: f64) -> (f64, f64) {
    let one_m = 1.0 - q;
    let ln_q = q.ln();
    let value = pow(one_m, g) * ln_q;
    let dq = if g == 0.0 {
        1.0 / q
    } else {
        -g * pow(one_m, g - 1.0) * ln_q + pow(one_m, g) / q
    };
    (value, dq)
}

/// `q^g log(1-q)` and its derivative in `q`.
#[inline]
fn negative_term(q: f64, g: f64) -> (f64, f64) {
    let ln_1mq = (-q).ln_1p();
    let value = pow(q, g) * ln_1mq;
    let dq = if g == 0.0 {
        -1.0 / (1.0 - q)
    } else {
        g * pow(q, g - 1.0) * ln_1mq - pow(q, g) / (1.0 - q)
    };
    (value, dq)
}

/// Negative-suppressed focal loss.
///
/// Pixels with ground truth exactly 1 are positives; every other pixel is a
/// negative weighted by `NEG_WEIGHT * (1 - p)^delta`. The sum is normalized
/// by the positive count, floored at 1 for head-free inputs.
pub fn nsf_loss(pred: &DenseGrid, gt_heatmap: &DenseGrid, cfg: &LossConfig) -> Result<LossResult> {
    gt_heatmap.ensure_same_shape(pred)?;
    if let Some(v) = gt_heatmap.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!(
            "ground-truth heatmap value {v} outside [0, 1]"
        )));
    }
    let positives = gt_heatmap.values().iter().filter(|&&p| p == 1.0).count();
    let norm = 1.0 / positives.max(1) as f64;

    let mut grad = DenseGrid::zeros(pred.height(), pred.width());
    let mut total = 0.0;
    for ((&ph, &p), g) in pred
        .values()
        .iter()
        .zip(gt_heatmap.values())
        .zip(grad.values_mut())
    {
        let (q, live) = clamp_prob(ph, cfg.prob_eps);
        let (value, dq) = if p == 1.0 {
            positive_term(q, cfg.gamma)
        } else {
            let w = NEG_WEIGHT * pow(1.0 - p, cfg.delta);
            let (v, d) = negative_term(q, cfg.gamma);
            (w * v, w * d)
        };
        total += value;
        if live {
            *g = -norm * dq;
        }
    }
    Ok(LossResult {
        value: -norm * total,
        grad,
    })
}

/// Background pixels (ground truth exactly 0) predicted above the threshold,
/// as row-major indices in ascending order.
pub fn fp_region(gt_heatmap: &DenseGrid, pred: &DenseGrid, cfg: &LossConfig) -> Result<Vec<usize>> {
    gt_heatmap.ensure_same_shape(pred)?;
    Ok(gt_heatmap
        .values()
        .iter()
        .zip(pred.values())
        .enumerate()
        .filter(|(_, (&h, &ph))| h == 0.0 && ph > cfg.fp_region_thresh)
        .map(|(j, _)| j)
        .collect())
}

/// Focal penalty averaged over `region`. The region is treated as a
/// constant: no gradient flows through membership.
pub fn fp_loss(pred: &DenseGrid, region: &[usize], cfg: &LossConfig) -> Result<LossResult> {
    if let Some(&bad) = region.iter().find(|&&j| j >= pred.len()) {
        return Err(Error::InvalidArgument(format!(
            "region index {bad} out of range for {} pixels",
            pred.len()
        )));
    }
    if region.is_empty() {
        return Ok(LossResult::zero(pred.shape()));
    }
    let norm = 1.0 / region.len() as f64;
    let mut grad = DenseGrid::zeros(pred.height(), pred.width());
    let mut total = 0.0;
    let values = pred.values();
    let g = grad.values_mut();
    for &j in region {
        let (q, live) = clamp_prob(values[j], cfg.prob_eps);
        let (v, dq) = negative_term(q, cfg.gamma);
        total += v;
        if live {
            g[j] -= norm * dq;
        }
    }
    Ok(LossResult {
        value: -norm * total,
        grad,
    })
}

pub fn mse_loss(pred_density: &DenseGrid, gt_density: &DenseGrid) -> Result<LossResult> {
    gt_density.ensure_same_shape(pred_density)?;
    let n = pred_density.len() as f64;
    let mut grad = DenseGrid::zeros(pred_density.height(), pred_density.width());
    let mut total = 0.0;
    for ((&d, &t), g) in pred_density
        .values()
        .iter()
        .zip(gt_density.values())
        .zip(grad.values_mut())
    {
        let r = d - t;
        total += r * r;
        *g = 2.0 * r / n;
    }
    Ok(LossResult {
        value: total / n,
        grad,
    })
}

/// Weighted sum of the three losses, with the gradient routed to each head.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub nsf: f64,
    pub fp: f64,
    pub reg: f64,
    /// Gradient for the localization head output.
    pub loc_grad: DenseGrid,
    /// Gradient for the counting head output.
    pub count_grad: DenseGrid,
}

pub fn total_loss(nsf: &LossResult, fp: &LossResult, reg: &LossResult, cfg: &LossConfig) -> Result<TotalLoss> {
    nsf.grad.ensure_same_shape(&fp.grad)?;
    let value = nsf.value + cfg.lambda1 * fp.value + cfg.lambda2 * reg.value;
    let mut loc_grad = nsf.grad.clone();
    for (g, &f) in loc_grad.values_mut().iter_mut().zip(fp.grad.values()) {
        *g += cfg.lambda1 * f;
    }
    let count_grad = reg.grad.map(|g| cfg.lambda2 * g);
    Ok(TotalLoss {
        value,
        nsf: nsf.value,
        fp: fp.value,
        reg: reg.value,
        loc_grad,
        count_grad,
    })
}

/// Evaluates all three losses for one prediction pair. The false-positive
/// region is recomputed from the current heatmap.
pub fn evaluate_losses(
    pred_heatmap: &DenseGrid,
    gt_heatmap: &DenseGrid,
    pred_density: &DenseGrid,
    gt_density: &DenseGrid,
    cfg: &LossConfig,
) -> Result<TotalLoss> {
    let nsf = nsf_loss(pred_heatmap, gt_heatmap, cfg)?;
    let region = fp_region(gt_heatmap, pred_heatmap, cfg)?;
    let fp = fp_loss(pred_heatmap, &region, cfg)?;
    let reg = mse_loss(pred_density, gt_density)?;
    total_loss(&nsf, &fp, &reg, cfg)
}
