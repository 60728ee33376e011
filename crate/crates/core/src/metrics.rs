//! Localization and counting scores.
//!
//! A prediction matches a ground-truth head when it lies strictly closer than
//! the head's radius: `min(h, w) / 2` in [`MatchMode::Small`], `sqrt(h^2 +
//! w^2) / 2` in [`MatchMode::Large`]. Association is a maximum-cardinality
//! matching over those edges, tie-broken to the minimum total distance, so
//! results do not depend on input order and every edge added by the larger
//! radius can only keep or raise the true-positive count.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::annotation::{ImageRecord, PointAnnotation};
use crate::decoder::Detection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Small,
    Large,
}

impl MatchMode {
    pub fn radius(self, gt: &PointAnnotation) -> f64 {
        match self {
            MatchMode::Small => gt.box_w.min(gt.box_h) / 2.0,
            MatchMode::Large => gt.box_w.hypot(gt.box_h) / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl AddAssign for Tally {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Tally {
    /// Precision, recall and F1, each 0 when its denominator is 0.
    pub fn scores(&self) -> LocalizationScores {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        LocalizationScores {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(prediction index, ground-truth index)` pairs.
    pub pairs: Vec<(usize, usize)>,
    pub total_distance: f64,
}

impl MatchResult {
    pub fn tally(&self) -> Tally {
        Tally {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }
}

/// Rectangular assignment (`rows <= cols`): every row gets a distinct column
/// minimizing the summed cost. Shortest augmenting paths with potentials,
/// `O(rows^2 * cols)`. Returns the column of each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    debug_assert!(n <= m);
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Maximum-cardinality, minimum-total-distance matching of predictions to
/// ground-truth heads under `mode`.
pub fn match_points(preds: &[Detection], gts: &[PointAnnotation], mode: MatchMode) -> Result<MatchResult> {
    if let Some(g) = gts.iter().find(|g| !(g.box_w > 0.0 && g.box_h > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "non-positive head box {}x{} at ({}, {})",
            g.box_w, g.box_h, g.x, g.y
        )));
    }
    let radii: Vec<f64> = gts.iter().map(|g| mode.radius(g)).collect();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        for (j, g) in gts.iter().enumerate() {
            let d = g.distance_to(p.x as f64, p.y as f64);
            if d < radii[j] {
                edges.push((i, j, d));
            }
        }
    }

    // Only endpoints of some edge can be matched.
    let mut pred_ids: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let mut gt_ids: Vec<usize> = edges.iter().map(|e| e.1).collect();
    pred_ids.sort_unstable();
    pred_ids.dedup();
    gt_ids.sort_unstable();
    gt_ids.dedup();

    let mut pairs = Vec::new();
    let mut total_distance = 0.0;
    if !edges.is_empty() {
        // A missing edge costs more than all real edges together, so the
        // optimum first maximizes the number of real edges, then minimizes
        // their summed distance.
        let big = 1.0 + edges.iter().map(|e| e.2).sum::<f64>();
        let transpose = pred_ids.len() > gt_ids.len();
        let (rows, cols) = if transpose {
            (&gt_ids, &pred_ids)
        } else {
            (&pred_ids, &gt_ids)
        };
        let mut cost = vec![vec![big; cols.len()]; rows.len()];
        let mut dist = vec![vec![None; cols.len()]; rows.len()];
        for &(i, j, d) in &edges {
            let pi = pred_ids.binary_search(&i).unwrap();
            let gj = gt_ids.binary_search(&j).unwrap();
            let (r, c) = if transpose { (gj, pi) } else { (pi, gj) };
            cost[r][c] = d;
            dist[r][c] = Some(d);
        }
        for (r, c) in min_cost_assignment(&cost).into_iter().enumerate() {
            if let Some(d) = dist[r][c] {
                let (pi, gj) = if transpose { (cols[c], rows[r]) } else { (rows[r], cols[c]) };
                pairs.push((pi, gj));
                total_distance += d;
            }
        }
        pairs.sort_unstable();
    }

    let tp = pairs.len();
    Ok(MatchResult {
        tp,
        fp: preds.len() - tp,
        fn_: gts.len() - tp,
        pairs,
        total_distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingScores {
    pub mae: f64,
    pub mse: f64,
    /// Absent when every ground-truth count is zero.
    pub nae: Option<f64>,
}

/// MAE, root-mean-squared error and NAE over `(predicted, ground truth)`
/// count pairs. NAE skips images with zero ground truth.
pub fn counting_scores(pairs: &[(f64, usize)]) -> Result<CountingScores> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no count pairs to score".into()));
    }
    let n = pairs.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut rel = 0.0;
    let mut rel_n = 0usize;
    for &(p, g) in pairs {
        let e = p - g as f64;
        abs += e.abs();
        sq += e * e;
        if g > 0 {
            rel += e.abs() / g as f64;
            rel_n += 1;
        }
    }
    Ok(CountingScores {
        mae: abs / n,
        mse: (sq / n).sqrt(),
        nae: (rel_n > 0).then(|| rel / rel_n as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub images: usize,
    /// Decode threshold the detections were produced with, when known.
    pub threshold: Option<f64>,
    pub small: LocalizationScores,
    pub large: LocalizationScores,
    pub mae: f64,
    pub mse: f64,
    pub nae: Option<f64>,
}

impl EvalReport {
    pub fn localization(&self, mode: MatchMode) -> &LocalizationScores {
        match mode {
            MatchMode::Small => &self.small,
            MatchMode::Large => &self.large,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            path: "<report>".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("images: {}\n", self.images));
        if let Some(t) = self.threshold {
            s.push_str(&format!("threshold: {t:.2}\n"));
        }
        s.push_str("mode      tp     fp     fn   precision  recall  f1\n");
        for (name, l) in [("sigma_s", &self.small), ("sigma_l", &self.large)] {
            s.push_str(&format!(
                "{name:<8}{:>5}  {:>5}  {:>5}   {:>8.4}  {:>6.4}  {:.4}\n",
                l.tp, l.fp, l.fn_, l.precision, l.recall, l.f1
            ));
        }
        let nae = self
            .nae
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into());
        s.push_str(&format!("MAE {:.4}  MSE {:.4}  NAE {nae}\n", self.mae, self.mse));
        s
    }
}

/// Predictions for one image.
#[derive(Debug, Clone, Copy)]
pub struct EvalSample<'a> {
    pub detections: &'a [Detection],
    pub record: &'a ImageRecord,
    pub predicted_count: f64,
}

/// Micro-averaged localization scores in both modes plus counting scores.
pub fn evaluate(samples: &[EvalSample<'_>]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let mut small = Tally::default();
    let mut large = Tally::default();
    let mut counts = Vec::with_capacity(samples.len());
    for s in samples {
        small += match_points(s.detections, &s.record.points, MatchMode::Small)?.tally();
        large += match_points(s.detections, &s.record.points, MatchMode::Large)?.tally();
        counts.push((s.predicted_count, s.record.count()));
    }
    let c = counting_scores(&counts)?;
    Ok(EvalReport {
        images: samples.len(),
        threshold: None,
        small: small.scores(),
        large: large.scores(),
        mae: c.mae,
        mse: c.mse,
        nae: c.nae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: usize, y: usize) -> Detection {
        Detection { x, y, confidence: 0.9 }
    }

    #[test]
    fn exact_hit_large() {
        let gt = [PointAnnotation::new(5.0, 5.0, 4.0, 3.0)];
        assert_eq!(MatchMode::Large.radius(&gt[0]), 2.5);
        let m = match_points(&[det(5, 5)], &gt, MatchMode::Large).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));
    }

    #[test]
    fn miss_under_small_radius() {
        let gt = [PointAnnotation::new(5.0, 5.0, 4.0, 3.0)];
        assert_eq!(MatchMode::Small.radius(&gt[0]), 1.5);
        let m = match_points(&[det(7, 5)], &gt, MatchMode::Small).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
        // Strict inequality: distance exactly 2.0 against radius 2.0.
        let gt2 = [PointAnnotation::new(5.0, 5.0, 4.0, 4.0)];
        let m = match_points(&[det(7, 5)], &gt2, MatchMode::Small).unwrap();
        assert_eq!(m.tp, 0);
    }

    #[test]
    fn no_predictions() {
        let gts = vec![PointAnnotation::new(1.0, 1.0, 2.0, 2.0); 3];
        let m = match_points(&[], &gts, MatchMode::Large).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (0, 0, 3));
    }

    #[test]
    fn bad_box_rejected() {
        let gts = [PointAnnotation::new(1.0, 1.0, 0.0, 2.0)];
        assert!(match_points(&[], &gts, MatchMode::Large).is_err());
    }

    #[test]
    fn greedy_trap_resolved() {
        // Pred 0 is closest to gt 0, but gt 0 is also reachable from pred 1,
        // which reaches nothing else. Greedy nearest-first would lose a match.
        let gts = [
            PointAnnotation::new(10.0, 10.0, 6.0, 6.0),
            PointAnnotation::new(13.0, 10.0, 5.0, 5.0),
        ];
        let preds = [det(11, 10), det(8, 10)];
        let m = match_points(&preds, &gts, MatchMode::Small).unwrap();
        assert_eq!(m.tp, 2);
        assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn min_distance_tie_break() {
        let gts = [
            PointAnnotation::new(0.0, 0.0, 10.0, 10.0),
            PointAnnotation::new(4.0, 0.0, 10.0, 10.0),
        ];
        let preds = [det(1, 0), det(3, 0)];
        let m = match_points(&preds, &gts, MatchMode::Small).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert!((m.total_distance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn prf_arithmetic() {
        let s = Tally { tp: 2, fp: 1, fn_: 1 }.scores();
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        let z = Tally::default().scores();
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn counting_examples() {
        let c = counting_scores(&[(10.0, 10)]).unwrap();
        assert_eq!((c.mae, c.mse, c.nae), (0.0, 0.0, Some(0.0)));
        let c = counting_scores(&[(12.0, 10), (7.0, 10)]).unwrap();
        assert!((c.mae - 2.5).abs() < 1e-15);
        assert!((c.mse - 6.5f64.sqrt()).abs() < 1e-15);
        assert!((c.mse - 2.5495).abs() < 1e-4);
        assert!((c.nae.unwrap() - 0.25).abs() < 1e-15);
        let c = counting_scores(&[(1.0, 0), (3.0, 4)]).unwrap();
        assert!((c.nae.unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(counting_scores(&[(1.0, 0)]).unwrap().nae, None);
        assert!(counting_scores(&[]).is_err());
    }

    fn rec(id: &str, pts: &[(f64, f64)]) -> ImageRecord {
        ImageRecord::new(
            id,
            32,
            32,
            pts.iter().map(|&(x, y)| PointAnnotation::new(x, y, 4.0, 4.0)).collect(),
        )
    }

    #[test]
    fn evaluate_perfect() {
        let r = rec("a", &[(3.0, 3.0), (10.0, 12.0)]);
        let dets = [det(3, 3), det(10, 12)];
        let rep = evaluate(&[EvalSample {
            detections: &dets,
            record: &r,
            predicted_count: 2.0,
        }])
        .unwrap();
        for l in [&rep.small, &rep.large] {
            assert_eq!((l.precision, l.recall, l.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!((rep.mae, rep.mse, rep.nae), (0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn evaluate_micro_average() {
        let a = rec("a", &[(3.0, 3.0)]);
        let b = rec("b", &[(3.0, 3.0)]);
        let hit = [det(3, 3)];
        let miss = [det(20, 20)];
        let rep = evaluate(&[
            EvalSample {
                detections: &hit,
                record: &a,
                predicted_count: 1.0,
            },
            EvalSample {
                detections: &miss,
                record: &b,
                predicted_count: 1.0,
            },
        ])
        .unwrap();
        assert_eq!((rep.large.tp, rep.large.fp, rep.large.fn_), (1, 1, 1));
        assert_eq!((rep.large.precision, rep.large.recall, rep.large.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn evaluate_empty_predictions() {
        let a = rec("a", &[(3.0, 3.0)]);
        let rep = evaluate(&[EvalSample {
            detections: &[],
            record: &a,
            predicted_count: 0.0,
        }])
        .unwrap();
        assert_eq!((rep.large.precision, rep.large.recall, rep.large.f1), (0.0, 0.0, 0.0));
        assert!(evaluate(&[]).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let a = rec("a", &[(3.0, 3.0), (9.0, 9.0)]);
        let dets = [det(3, 4)];
        let mut rep = evaluate(&[EvalSample {
            detections: &dets,
            record: &a,
            predicted_count: 1.7345678901234567,
        }])
        .unwrap();
        rep.threshold = Some(0.37);
        assert_eq!(EvalReport::from_json(&rep.to_json()).unwrap(), rep);
        assert!(rep.to_table().contains("sigma_l"));
    }
}
