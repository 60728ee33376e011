//! Mini-batch training on random crops with horizontal flips.

use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::MicroNet;
use crate::annotation::{ImageRecord, PointAnnotation};
use crate::error::{Error, Result};
use crate::grid::DenseGrid;
use crate::losses::{evaluate_losses, LossConfig};
use crate::rng::Rng;
use crate::supervision::{make_density, make_heatmap, SupervisionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub optimizer: AdamConfig,
    pub crop: usize,
    pub flip_prob: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch: 4,
            optimizer: AdamConfig::default(),
            crop: 64,
            flip_prob: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("batch must be >= 1".into()));
        }
        if self.crop == 0 || !self.crop.is_multiple_of(2) {
            return Err(Error::Config(format!("crop must be even and >= 2, got {}", self.crop)));
        }
        if !(self.optimizer.lr >= 0.0 && self.optimizer.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be >= 0, got {}", self.optimizer.lr)));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config(format!("flip_prob must be in [0, 1], got {}", self.flip_prob)));
        }
        Ok(())
    }
}

/// Mean component losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub nsf: f64,
    pub fp: f64,
    pub reg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLoss>,
    /// Total loss of every optimizer step (batch mean).
    pub step_losses: Vec<f64>,
}

impl TrainReport {
    /// `epoch,l_nsf,l_fp,l_r,total` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,l_nsf,l_fp,l_r,total\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.nsf, e.fp, e.reg, e.total));
        }
        s
    }
}

/// A training example: image crop plus its targets.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: DenseGrid,
    pub heatmap: DenseGrid,
    pub density: DenseGrid,
}

/// Cuts a `crop x crop` window at `(x0, y0)`, optionally mirrors it, and
/// builds the targets from the heads inside the window.
pub fn make_sample(
    record: &ImageRecord,
    x0: usize,
    y0: usize,
    crop: usize,
    flip: bool,
    sup: &SupervisionConfig,
) -> Result<Sample> {
    let pixels = record.pixels.as_ref().ok_or_else(|| Error::Validation {
        id: record.id.clone(),
        message: "record has no pixels".into(),
    })?;
    let mut image = pixels.crop(x0, y0, crop, crop)?;
    let limit = crop as f64;
    let mut points: Vec<PointAnnotation> = record
        .points
        .iter()
        .map(|p| PointAnnotation::new(p.x - x0 as f64, p.y - y0 as f64, p.box_w, p.box_h))
        .filter(|p| p.x >= 0.0 && p.x < limit && p.y >= 0.0 && p.y < limit)
        .collect();
    if flip {
        image = image.flip_horizontal();
        for p in &mut points {
            p.x = (limit - 1.0) - p.x;
        }
    }
    let sub = ImageRecord::new(record.id.clone(), crop, crop, points);
    Ok(Sample {
        heatmap: make_heatmap(&sub, sup)?,
        density: make_density(&sub, sup)?,
        image,
    })
}

fn draw_sample(record: &ImageRecord, cfg: &TrainConfig, sup: &SupervisionConfig, rng: &mut Rng) -> Result<Sample> {
    if record.width < cfg.crop || record.height < cfg.crop {
        return Err(Error::Config(format!(
            "crop {} exceeds image '{}' ({}x{})",
            cfg.crop, record.id, record.width, record.height
        )));
    }
    let x0 = rng.int_inclusive(0, (record.width - cfg.crop) as u64) as usize;
    let y0 = rng.int_inclusive(0, (record.height - cfg.crop) as u64) as usize;
    let flip = rng.bernoulli(cfg.flip_prob);
    make_sample(record, x0, y0, cfg.crop, flip, sup)
}

/// Trains `net` in place. Each epoch visits every record once in shuffled
/// order, one random crop per visit; gradients are averaged over the batch.
pub fn train(
    net: &mut MicroNet,
    dataset: &[ImageRecord],
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    sup: &SupervisionConfig,
) -> Result<TrainReport> {
    train_with_progress(net, dataset, cfg, loss_cfg, sup, |_| {})
}

pub fn train_with_progress(
    net: &mut MicroNet,
    dataset: &[ImageRecord],
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    sup: &SupervisionConfig,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> Result<TrainReport> {
    cfg.validate()?;
    loss_cfg.validate()?;
    sup.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    for r in dataset {
        if r.pixels.is_none() {
            return Err(Error::Validation {
                id: r.id.clone(),
                message: "training record has no pixels".into(),
            });
        }
    }

    let mut rng = Rng::new(cfg.seed);
    let mut opt = Adam::new(cfg.optimizer, net.params().len());
    let mut grads = vec![0.0; net.params().len()];
    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        step_losses: Vec::new(),
    };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut sums = [0.0f64; 4];
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch) {
            grads.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_total = 0.0;
            for &idx in batch {
                let sample = draw_sample(&dataset[idx], cfg, sup, &mut rng)?;
                let (pred, cache) = net.forward_cached(&sample.image).map_err(|e| match e {
                    Error::NonFiniteOutput(_) => Error::NonFiniteLoss {
                        step,
                        nsf: f64::NAN,
                        fp: f64::NAN,
                        reg: f64::NAN,
                    },
                    other => other,
                })?;
                let loss = evaluate_losses(&pred.heatmap, &sample.heatmap, &pred.density, &sample.density, loss_cfg)?;
                if !loss.value.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        step,
                        nsf: loss.nsf,
                        fp: loss.fp,
                        reg: loss.reg,
                    });
                }
                let gh = loss.loc_grad.map(|g| g * scale);
                let gd = loss.count_grad.map(|g| g * scale);
                net.backward_cached(&cache, &gh, &gd, &mut grads)?;
                for (s, v) in sums.iter_mut().zip([loss.nsf, loss.fp, loss.reg, loss.value]) {
                    *s += v;
                }
                batch_total += loss.value;
                seen += 1;
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    step,
                    nsf: f64::NAN,
                    fp: f64::NAN,
                    reg: f64::NAN,
                });
            }
            opt.step(net.params_mut(), &grads);
            report.step_losses.push(batch_total * scale);
            step += 1;
        }
        let n = seen as f64;
        let e = EpochLoss {
            epoch: epoch + 1,
            nsf: sums[0] / n,
            fp: sums[1] / n,
            reg: sums[2] / n,
            total: sums[3] / n,
        };
        on_epoch(&e);
        report.epochs.push(e);
    }
    Ok(report)
}
