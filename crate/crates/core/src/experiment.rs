//! End-to-end runs: train on one split, pick the decode threshold on the
//! validation split, score the test split.

use serde::{Deserialize, Serialize};

use crate::annotation::ImageRecord;
use crate::decoder::{count_from_density, decode, search_threshold, DecodeConfig, Detection, DetectionsLine};
use crate::error::{Error, Result};
use crate::grid::DenseGrid;
use crate::losses::LossConfig;
use crate::metrics::{evaluate, EvalReport, EvalSample, MatchMode};
use crate::micronet::{train, Architecture, MicroNet, TrainConfig, TrainReport};
use crate::rng::Rng;
use crate::supervision::SupervisionConfig;
use crate::synth::{generate_split, SceneConfig, Split};

/// Stream label for network initialization, derived from the training seed.
const INIT_STREAM: u64 = 0x1417;

pub fn init_network(arch: Architecture, seed: u64) -> Result<MicroNet> {
    MicroNet::init(arch, &mut Rng::new(seed).derive(INIT_STREAM))
}

fn pixels(r: &ImageRecord) -> Result<&DenseGrid> {
    r.pixels.as_ref().ok_or_else(|| Error::Validation {
        id: r.id.clone(),
        message: "record has no pixels".into(),
    })
}

/// Heatmaps and density maps for each record.
pub fn predict_all(net: &MicroNet, records: &[ImageRecord]) -> Result<Vec<(DenseGrid, DenseGrid)>> {
    records
        .iter()
        .map(|r| {
            let p = net.forward(pixels(r)?)?;
            Ok((p.heatmap, p.density))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub detections: Vec<DetectionsLine>,
}

/// Searches the threshold on `val` under the lenient radius, then decodes
/// and scores `test` at that threshold.
pub fn evaluate_model(net: &MicroNet, val: &[ImageRecord], test: &[ImageRecord], decode_cfg: &DecodeConfig) -> Result<Evaluation> {
    let val_set: Vec<(DenseGrid, ImageRecord)> = predict_all(net, val)?
        .into_iter()
        .zip(val)
        .map(|((h, _), r)| (h, r.clone()))
        .collect();
    let tau = search_threshold(&val_set, decode_cfg, MatchMode::Large)?;
    let mut report = evaluate_at(net, test, &decode_cfg.with_threshold(tau))?;
    report.report.threshold = Some(tau);
    Ok(report)
}

/// Decodes and scores `test` at `decode_cfg.threshold`.
pub fn evaluate_at(net: &MicroNet, test: &[ImageRecord], decode_cfg: &DecodeConfig) -> Result<Evaluation> {
    let preds = predict_all(net, test)?;
    let dets: Vec<Vec<Detection>> = preds.iter().map(|(h, _)| decode(h, decode_cfg)).collect();
    let samples: Vec<EvalSample<'_>> = dets
        .iter()
        .zip(&preds)
        .zip(test)
        .map(|((d, (_, dens)), r)| EvalSample {
            detections: d,
            record: r,
            predicted_count: count_from_density(dens),
        })
        .collect();
    let mut report = evaluate(&samples)?;
    report.threshold = Some(decode_cfg.threshold);
    let detections = dets
        .iter()
        .zip(test)
        .map(|(d, r)| DetectionsLine::new(r.id.clone(), d))
        .collect();
    Ok(Evaluation { report, detections })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub supervision: SupervisionConfig,
    pub decode: DecodeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            n_train: 200,
            n_val: 50,
            n_test: 50,
            data_seed: 7,
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            supervision: SupervisionConfig::default(),
            decode: DecodeConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub split: Split,
    pub net: MicroNet,
    pub training: TrainReport,
    pub evaluation: Evaluation,
}

pub fn run_experiment(cfg: &ExperimentConfig, arch: Architecture) -> Result<ExperimentOutcome> {
    let split = generate_split(&cfg.scene, cfg.n_train, cfg.n_val, cfg.n_test, cfg.data_seed)?;
    let mut net = init_network(arch, cfg.train.seed)?;
    let training = train(&mut net, &split.train, &cfg.train, &cfg.loss, &cfg.supervision)?;
    let evaluation = evaluate_model(&net, &split.val, &split.test, &cfg.decode)?;
    Ok(ExperimentOutcome {
        split,
        net,
        training,
        evaluation,
    })
}
