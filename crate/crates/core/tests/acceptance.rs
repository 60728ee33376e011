//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p crowdloc --release --test acceptance -- --nocapture`.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use crowdloc::annotation::{ImageRecord, PointAnnotation};
use crowdloc::decoder::{decode, local_peaks, DecodeConfig, Detection};
use crowdloc::experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
use crowdloc::grid::DenseGrid;
use crowdloc::losses::{fp_loss, fp_region, mse_loss, nsf_loss, total_loss, LossConfig};
use crowdloc::metrics::{match_points, MatchMode};
use crowdloc::micronet::{Architecture, MicroNet};
use crowdloc::rng::Rng;
use crowdloc::supervision::{make_density, make_heatmap, SupervisionConfig};

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {id} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

/// Relative error with an absolute floor on the denominator.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_grid(rng: &mut Rng, h: usize, w: usize, lo: f64, hi: f64) -> DenseGrid {
    DenseGrid::from_vec(h, w, (0..h * w).map(|_| rng.uniform_range(lo, hi)).collect()).unwrap()
}

/// Heatmap-like target: exact ones, exact zeros, and soft values.
fn random_heatmap(rng: &mut Rng, h: usize, w: usize) -> DenseGrid {
    let values = (0..h * w)
        .map(|_| {
            let u = rng.uniform();
            if u < 0.1 {
                1.0
            } else if u < 0.4 {
                0.0
            } else {
                rng.uniform()
            }
        })
        .collect();
    DenseGrid::from_vec(h, w, values).unwrap()
}

fn central_difference(pred: &DenseGrid, j: usize, step: f64, f: impl Fn(&DenseGrid) -> f64) -> f64 {
    let mut plus = pred.clone();
    plus.values_mut()[j] += step;
    let mut minus = pred.clone();
    minus.values_mut()[j] -= step;
    (f(&plus) - f(&minus)) / (2.0 * step)
}

#[test]
fn criterion_1_loss_gradients_match_finite_differences() {
    let start = Instant::now();
    let cfg = LossConfig::default();
    let mut rng = Rng::new(101);
    let step = 1e-5;
    let (mut worst_nsf, mut worst_fp, mut worst_mse) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let pred = random_grid(&mut rng, 8, 8, 0.05, 0.95);
        let gt = random_heatmap(&mut rng, 8, 8);

        let nsf = nsf_loss(&pred, &gt, &cfg).unwrap();
        for j in 0..pred.len() {
            let fd = central_difference(&pred, j, step, |p| nsf_loss(p, &gt, &cfg).unwrap().value);
            worst_nsf = worst_nsf.max(rel_err(nsf.grad.values()[j], fd));
        }

        let region = fp_region(&gt, &pred, &cfg).unwrap();
        let fp = fp_loss(&pred, &region, &cfg).unwrap();
        for j in 0..pred.len() {
            let fd = central_difference(&pred, j, step, |p| fp_loss(p, &region, &cfg).unwrap().value);
            worst_fp = worst_fp.max(rel_err(fp.grad.values()[j], fd));
        }

        let target = random_grid(&mut rng, 8, 8, 0.0, 0.1);
        let mse = mse_loss(&pred, &target).unwrap();
        for j in 0..pred.len() {
            let fd = central_difference(&pred, j, step, |p| mse_loss(p, &target).unwrap().value);
            worst_mse = worst_mse.max(rel_err(mse.grad.values()[j], fd));
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_nsf < 1e-4 && worst_fp < 1e-4 && worst_mse < 1e-4 && elapsed < Duration::from_secs(10);
    report(
        1,
        "loss gradient verification",
        pass,
        format!("max rel err nsf={worst_nsf:.2e} fp={worst_fp:.2e} mse={worst_mse:.2e} (< 1e-4), {elapsed:.2?} (< 10s)"),
    );
}

// Reference evaluations written directly from the loss formulas, pixel by
// pixel over (row, column), with separate positive/negative accumulators.
fn naive_nsf(pred: &DenseGrid, gt: &DenseGrid, gamma: f64, delta: f64) -> f64 {
    let (h, w) = pred.shape();
    let mut pos = 0.0;
    let mut neg = 0.0;
    let mut m = 0usize;
    for y in 0..h {
        for x in 0..w {
            let q = pred.get(x, y);
            let p = gt.get(x, y);
            if p == 1.0 {
                m += 1;
                pos += (1.0 - q).powf(gamma) * q.ln();
            } else {
                neg += (1.0 / 16.0) * (1.0 - p).powf(delta) * q.powf(gamma) * (1.0 - q).ln();
            }
        }
    }
    -(pos + neg) / (m.max(1) as f64)
}

fn naive_fp(pred: &DenseGrid, gt: &DenseGrid, gamma: f64, thresh: f64) -> f64 {
    let (h, w) = pred.shape();
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            let q = pred.get(x, y);
            if gt.get(x, y) == 0.0 && q > thresh {
                n += 1;
                sum += q.powf(gamma) * (1.0 - q).ln();
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        -sum / n as f64
    }
}

fn naive_mse(pred: &DenseGrid, gt: &DenseGrid) -> f64 {
    let (h, w) = pred.shape();
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            let d = pred.get(x, y) - gt.get(x, y);
            sum += d * d;
        }
    }
    sum / (h * w) as f64
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn criterion_2_losses_equal_naive_references() {
    let cfg = LossConfig::default();
    let mut rng = Rng::new(202);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pred = random_grid(&mut rng, 16, 16, 0.01, 0.99);
        let gt = random_heatmap(&mut rng, 16, 16);
        let dens_pred = random_grid(&mut rng, 16, 16, 0.0, 0.2);
        let dens_gt = random_grid(&mut rng, 16, 16, 0.0, 0.2);
        let pairs = [
            (nsf_loss(&pred, &gt, &cfg).unwrap().value, naive_nsf(&pred, &gt, cfg.gamma, cfg.delta)),
            (
                fp_loss(&pred, &fp_region(&gt, &pred, &cfg).unwrap(), &cfg).unwrap().value,
                naive_fp(&pred, &gt, cfg.gamma, cfg.fp_region_thresh),
            ),
            (mse_loss(&dens_pred, &dens_gt).unwrap().value, naive_mse(&dens_pred, &dens_gt)),
        ];
        for (fast, slow) in pairs {
            if !close(fast, slow, 1e-12) {
                failures += 1;
            }
            if slow != 0.0 {
                worst = worst.max((fast - slow).abs() / slow.abs());
            }
        }
    }
    report(
        2,
        "loss oracle equivalence",
        failures == 0,
        format!("{failures} mismatches over 300 comparisons, max rel diff {worst:.2e} (<= 1e-12)"),
    );
}

#[test]
fn criterion_3_density_sum_equals_head_count() {
    let cfg = SupervisionConfig::default();
    let mut rng = Rng::new(303);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for trial in 0..100 {
        let w = 8 + rng.index(193);
        let h = 8 + rng.index(193);
        let n = 1 + rng.index(200);
        let points = (0..n)
            .map(|i| {
                // Every fifth head sits on a corner or edge.
                let (x, y) = match (trial + i) % 5 {
                    0 => {
                        let corners = [(0.0, 0.0), (w as f64 - 1e-9, 0.0), (0.0, h as f64 - 1e-9), (w as f64 - 1e-9, h as f64 - 1e-9)];
                        corners[rng.index(4)]
                    }
                    _ => (rng.uniform_range(0.0, w as f64), rng.uniform_range(0.0, h as f64)),
                };
                PointAnnotation::new(x.min(w as f64 - 1e-9), y.min(h as f64 - 1e-9), 4.0, 4.0)
            })
            .collect();
        let rec = ImageRecord::new(format!("r{trial}"), w, h, points);
        let sum = make_density(&rec, &cfg).unwrap().sum();
        let err = (sum - n as f64).abs();
        worst = worst.max(err / n as f64);
        if !(err < 1e-6 * n as f64) {
            failures += 1;
        }
    }
    report(
        3,
        "count preservation",
        failures == 0,
        format!("{failures} failures; max |sum - n| / n = {worst:.2e} (< 1e-6)"),
    );
}

/// Maximum matched-pair count and, among maximum matchings, the minimum
/// summed distance, by enumerating every injective partial assignment.
fn brute_force_match(preds: &[Detection], gts: &[PointAnnotation], mode: MatchMode) -> (usize, f64) {
    fn go(i: usize, preds: &[Detection], gts: &[PointAnnotation], mode: MatchMode, used: &mut Vec<bool>, count: usize, dist: f64, best: &mut (usize, f64)) {
        if i == preds.len() {
            if count > best.0 || (count == best.0 && dist < best.1) {
                *best = (count, dist);
            }
            return;
        }
        go(i + 1, preds, gts, mode, used, count, dist, best);
        for (j, g) in gts.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = ((preds[i].x as f64 - g.x).powi(2) + (preds[i].y as f64 - g.y).powi(2)).sqrt();
            let r = match mode {
                MatchMode::Small => g.box_w.min(g.box_h) / 2.0,
                MatchMode::Large => (g.box_w * g.box_w + g.box_h * g.box_h).sqrt() / 2.0,
            };
            if d < r {
                used[j] = true;
                go(i + 1, preds, gts, mode, used, count + 1, dist + d, best);
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    go(0, preds, gts, mode, &mut vec![false; gts.len()], 0, 0.0, &mut best);
    best
}

fn random_layout(rng: &mut Rng, max_n: usize, extent: usize) -> (Vec<Detection>, Vec<PointAnnotation>) {
    let np = rng.index(max_n + 1);
    let ng = rng.index(max_n + 1);
    let gts = (0..ng)
        .map(|_| {
            PointAnnotation::new(
                rng.uniform_range(0.0, extent as f64),
                rng.uniform_range(0.0, extent as f64),
                rng.uniform_range(1.0, 8.0),
                rng.uniform_range(1.0, 8.0),
            )
        })
        .collect();
    let preds = (0..np)
        .map(|_| Detection {
            x: rng.index(extent),
            y: rng.index(extent),
            confidence: rng.uniform_range(0.3, 1.0),
        })
        .collect();
    (preds, gts)
}

#[test]
fn criterion_4_matching_equals_brute_force() {
    let mut rng = Rng::new(404);
    let mut failures = 0;
    let mut distance_failures = 0;
    let mut matched_total = 0;
    for _ in 0..500 {
        let (preds, gts) = random_layout(&mut rng, 6, 12);
        for mode in [MatchMode::Small, MatchMode::Large] {
            let got = match_points(&preds, &gts, mode).unwrap();
            let (card, dist) = brute_force_match(&preds, &gts, mode);
            matched_total += card;
            if got.tp != card || got.fp != preds.len() - card || got.fn_ != gts.len() - card {
                failures += 1;
            }
            if (got.total_distance - dist).abs() > 1e-9 {
                distance_failures += 1;
            }
        }
    }
    report(
        4,
        "matching oracle",
        failures == 0 && distance_failures == 0,
        format!(
            "{failures} cardinality and {distance_failures} distance mismatches over 1000 instance-modes ({matched_total} matched pairs total)"
        ),
    );
}

#[test]
fn criterion_5_threshold_monotonicity() {
    let mut rng = Rng::new(505);
    let grid = DecodeConfig::default().search_grid().unwrap();
    let mut radius_violations = 0;
    let mut tau_violations = 0;
    for _ in 0..200 {
        let (preds, gts) = random_layout(&mut rng, 12, 24);
        let small = match_points(&preds, &gts, MatchMode::Small).unwrap().tp;
        let large = match_points(&preds, &gts, MatchMode::Large).unwrap().tp;
        if large < small {
            radius_violations += 1;
        }

        let heat = random_grid(&mut rng, 24, 24, 0.0, 1.0);
        let mut prev: Option<Vec<Detection>> = None;
        for &tau in &grid {
            let dets = decode(&heat, &DecodeConfig::default().with_threshold(tau));
            if let Some(p) = &prev {
                let subset = dets.iter().all(|d| p.iter().any(|q| (q.x, q.y) == (d.x, d.y)));
                if dets.len() > p.len() || !subset {
                    tau_violations += 1;
                }
            }
            prev = Some(dets);
        }
    }
    report(
        5,
        "threshold monotonicity",
        radius_violations == 0 && tau_violations == 0,
        format!("{radius_violations} tp(large) < tp(small) violations, {tau_violations} threshold-order violations over 200 layouts"),
    );
}

#[test]
fn criterion_6_peaks_equal_window_oracle() {
    let mut rng = Rng::new(606);
    let mut failures = 0;
    let mut peaks_total = 0;
    for _ in 0..100 {
        // Distinct values: a shuffled ramp.
        let mut values: Vec<f64> = (0..32 * 32).map(|i| i as f64 / 1024.0).collect();
        rng.shuffle(&mut values);
        let g = DenseGrid::from_vec(32, 32, values).unwrap();
        let mut oracle = Vec::new();
        for y in 0..32i64 {
            for x in 0..32i64 {
                let c = g.get(x as usize, y as usize);
                let mut is_peak = true;
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let (nx, ny) = (x + dx, y + dy);
                        if (dx, dy) != (0, 0) && (0..32).contains(&nx) && (0..32).contains(&ny) && g.get(nx as usize, ny as usize) >= c {
                            is_peak = false;
                        }
                    }
                }
                if is_peak {
                    oracle.push((x as usize, y as usize));
                }
            }
        }
        let got: Vec<(usize, usize)> = local_peaks(&g).iter().map(|d| (d.x, d.y)).collect();
        peaks_total += oracle.len();
        if got != oracle {
            failures += 1;
        }
    }
    report(
        6,
        "decoder oracle",
        failures == 0,
        format!("{failures} of 100 grids differ ({peaks_total} oracle peaks)"),
    );
}

#[test]
fn criterion_7_network_gradients_match_finite_differences() {
    let loss_cfg = LossConfig::default();
    let sup = SupervisionConfig::default();
    let mut rng = Rng::new(707);
    let step = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for trial in 0..20 {
        // Jitter every parameter so no bias sits at zero: with dead trunk
        // units a zero bias puts pre-activations exactly on the ReLU kink.
        let mut net = MicroNet::init(Architecture::tiny(), &mut rng.derive(trial)).unwrap();
        for p in net.params_mut() {
            *p += rng.uniform_range(-0.05, 0.05);
        }
        let image = random_grid(&mut rng, 8, 8, 0.0, 1.0);
        let n_heads = 1 + rng.index(3);
        let points = (0..n_heads)
            .map(|_| PointAnnotation::new(rng.index(8) as f64, rng.index(8) as f64, 3.0, 3.0))
            .collect();
        let rec = ImageRecord::new("g", 8, 8, points);
        let gt_heat = make_heatmap(&rec, &sup).unwrap();
        let gt_dens = make_density(&rec, &sup).unwrap();

        let pred = net.forward(&image).unwrap();
        let region = fp_region(&gt_heat, &pred.heatmap, &loss_cfg).unwrap();
        let objective = |n: &MicroNet| {
            let p = n.forward(&image).unwrap();
            let nsf = nsf_loss(&p.heatmap, &gt_heat, &loss_cfg).unwrap();
            let fp = fp_loss(&p.heatmap, &region, &loss_cfg).unwrap();
            let reg = mse_loss(&p.density, &gt_dens).unwrap();
            total_loss(&nsf, &fp, &reg, &loss_cfg).unwrap()
        };
        let total = objective(&net);
        let analytic = net.backward(&image, &total.loc_grad, &total.count_grad).unwrap();
        for i in 0..analytic.len() {
            let mut plus = net.clone();
            plus.params_mut()[i] += step;
            let mut minus = net.clone();
            minus.params_mut()[i] -= step;
            let fd = (objective(&plus).value - objective(&minus).value) / (2.0 * step);
            // The loss reaches O(1e3) through lambda2, so the floor scales
            // with it to stay above finite-difference roundoff.
            let floor = 1e-6 * total.value.abs().max(1.0);
            worst = worst.max((analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(floor));
            checked += 1;
        }
    }
    report(
        7,
        "full-pipeline gradient check",
        worst < 1e-3,
        format!("max rel err {worst:.2e} (< 1e-3) over {checked} parameters in 20 trials"),
    );
}

struct Run {
    outcome: ExperimentOutcome,
    train_time: Duration,
    csv: String,
    report_json: String,
}

fn end_to_end() -> Run {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let outcome = run_experiment(&cfg, Architecture::default()).unwrap();
    let train_time = start.elapsed();
    Run {
        csv: outcome.training.to_csv(),
        report_json: outcome.evaluation.report.to_json(),
        outcome,
        train_time,
    }
}

fn first_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(end_to_end)
}

#[test]
fn criterion_8_end_to_end_training() {
    let run = first_run();
    let rep = &run.outcome.evaluation.report;
    let tau = rep.threshold.unwrap();
    let f1 = rep.large.f1;
    let nae = rep.nae.unwrap_or(f64::INFINITY);
    let finite = run.outcome.training.epochs.iter().all(|e| e.total.is_finite());
    let pass = f1 >= 0.85 && nae <= 0.2 && (0.3..=0.5).contains(&tau) && run.train_time <= Duration::from_secs(15 * 60) && finite;
    report(
        8,
        "end-to-end desk-scale training",
        pass,
        format!(
            "F1(sigma_l)={f1:.4} (>= 0.85), NAE={nae:.4} (<= 0.2), tau={tau:.2} in [0.3, 0.5], run {:.1?} (<= 15 min); F1(sigma_s)={:.4} MAE={:.3}",
            run.train_time, rep.small.f1, rep.mae
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    let first = first_run();
    let second = end_to_end();
    let same_csv = first.csv == second.csv;
    let same_report = first.report_json == second.report_json;
    let same_params = first.outcome.net.params() == second.outcome.net.params();
    report(
        9,
        "determinism",
        same_csv && same_report && same_params,
        format!("loss CSV identical: {same_csv}, EvalReport JSON identical: {same_report}, parameters identical: {same_params}"),
    );
}
