//! Dense-prediction crowd counting and localization.
//!
//! The crate covers the full numerical path from point labels to scores:
//!
//! - [`supervision`]: localization heatmaps (max-composed Gaussians with a
//!   k-nearest-neighbour bandwidth) and unit-mass counting density maps.
//! - [`losses`]: negative-suppressed focal loss, false-positive region loss,
//!   and density MSE, each with an analytic gradient.
//! - [`decoder`]: 3x3 local-maximum peak extraction, confidence thresholding,
//!   threshold search, and counting by summation.
//! - [`metrics`]: precision/recall/F1 under per-head match radii via optimal
//!   bipartite matching, plus MAE/MSE/NAE.
//! - [`micronet`]: a small two-head network with hand-written backward pass,
//!   Adam, and a crop/flip training loop.
//! - [`synth`]: deterministic synthetic crowd scenes.
//!
//! Coordinates are `(x, y)` = (column, row) with the origin at the center of
//! the top-left pixel. All randomness flows through [`rng::Rng`].

pub mod annotation;
pub mod dataset;
pub mod decoder;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod micronet;
pub mod rng;
pub mod supervision;
pub mod synth;

pub use annotation::{load_annotations, ImageRecord, PointAnnotation};
pub use decoder::{decode, local_peaks, DecodeConfig, Detection};
pub use error::{Error, Result};
pub use grid::DenseGrid;
pub use io::{export_pgm, load_grid, store_grid};
pub use losses::{LossConfig, LossResult};
pub use metrics::{EvalReport, MatchMode};
pub use micronet::{Architecture, MicroNet, TrainConfig};
pub use rng::Rng;
pub use supervision::SupervisionConfig;
pub use synth::SceneConfig;
