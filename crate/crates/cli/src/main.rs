//! `crowdloc` command-line tool.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crowdloc::dataset::{load_records, pixel_path, store_records};
use crowdloc::decoder::{decode, write_detections_jsonl, DecodeConfig};
use crowdloc::experiment::{evaluate_at, evaluate_model, init_network};
use crowdloc::io::{export_pgm, store_grid, RgbImage};
use crowdloc::micronet::{load_checkpoint, store_checkpoint, train_with_progress, AdamConfig, Architecture, TrainConfig};
use crowdloc::supervision::{make_density, make_heatmap};
use crowdloc::synth::generate_split;
use crowdloc::{Error, ImageRecord, LossConfig, Result, SceneConfig, SupervisionConfig};

use manifest::RunManifest;

const CHECKPOINT_FILE: &str = "model.dpw";
const CURVE_FILE: &str = "losses.csv";
const REPORT_FILE: &str = "report.json";
const DETECTIONS_FILE: &str = "detections.jsonl";

#[derive(Parser)]
#[command(name = "crowdloc", version, about = "Crowd counting and localization on synthetic scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test synthetic scenes.
    GenData(GenDataArgs),
    /// Build heatmap and density targets for one split as DPG1 grids.
    Targets(TargetsArgs),
    /// Train the network on `<data>/train`.
    Train(TrainArgs),
    /// Pick the threshold on `<data>/val` and score `<data>/test`.
    Eval(EvalArgs),
    /// Export heatmap, density, and overlay images for one scene.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    val: usize,
    #[arg(long, default_value_t = 50)]
    test: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    image_size: usize,
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    #[arg(long, default_value_t = 15)]
    max_count: usize,
    #[arg(long, default_value_t = 2.0)]
    min_radius: f64,
    #[arg(long, default_value_t = 6.0)]
    max_radius: f64,
    #[arg(long, default_value_t = 6.0)]
    min_separation: f64,
    #[arg(long, default_value_t = 0.05)]
    noise_std: f64,
}

#[derive(Args)]
struct SupervisionArgs {
    /// Counting Gaussian width in output pixels.
    #[arg(long, default_value_t = 3.0)]
    sigma_c: f64,
}

impl SupervisionArgs {
    fn config(&self) -> SupervisionConfig {
        SupervisionConfig {
            sigma_c: self.sigma_c,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct TargetsArgs {
    /// Split directory holding `annotations.json`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    supervision: SupervisionArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset root produced by `gen-data`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 4.0)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 1000.0)]
    lambda2: f64,
    #[command(flatten)]
    supervision: SupervisionArgs,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 64)]
    crop: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fixed decode threshold; skips the validation search.
    #[arg(long)]
    threshold: Option<f64>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Split directory holding `annotations.json`.
    #[arg(long)]
    data: PathBuf,
    /// Scene id, e.g. `val_0003`.
    #[arg(long)]
    id: String,
    #[arg(long)]
    out: PathBuf,
    /// Checkpoint to plot predictions from; targets are plotted without it.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.4)]
    threshold: f64,
    #[command(flatten)]
    supervision: SupervisionArgs,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let scene = SceneConfig {
        image_size: a.image_size,
        count_range: (a.min_count, a.max_count),
        radius_range: (a.min_radius, a.max_radius),
        min_separation: a.min_separation,
        noise_std: a.noise_std,
        seed: a.seed,
    };
    scene.validate()?;
    #[derive(Serialize)]
    struct Config {
        scene: SceneConfig,
        train: usize,
        val: usize,
        test: usize,
    }
    let mut manifest = RunManifest::new(
        "gen-data",
        Some(a.seed),
        &Config {
            scene,
            train: a.train,
            val: a.val,
            test: a.test,
        },
    );
    let split = generate_split(&scene, a.train, a.val, a.test, a.seed)?;
    for (name, records) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        manifest.outputs.extend(store_records(&a.out.join(name), records)?);
    }
    manifest.store(&a.out)?;
    println!(
        "wrote {} scenes ({} train, {} val, {} test) to {}",
        a.train + a.val + a.test,
        a.train,
        a.val,
        a.test,
        a.out.display()
    );
    Ok(())
}

fn targets(a: &TargetsArgs) -> Result<()> {
    let sup = a.supervision.config();
    sup.validate()?;
    let records = load_records(&a.data)?;
    create_dir(&a.out)?;
    let mut manifest = RunManifest::new("targets", None, &sup);
    manifest.inputs.push(a.data.clone());
    for r in &records {
        let heat = a.out.join(format!("{}.heatmap.dpg", r.id));
        let dens = a.out.join(format!("{}.density.dpg", r.id));
        store_grid(&make_heatmap(r, &sup)?, &heat)?;
        store_grid(&make_density(r, &sup)?, &dens)?;
        manifest.outputs.extend([heat, dens]);
    }
    manifest.store(&a.out)?;
    println!("wrote targets for {} images to {}", records.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainRunConfig {
    train: TrainConfig,
    loss: LossConfig,
    supervision: SupervisionConfig,
    architecture: Architecture,
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let cfg = TrainRunConfig {
        train: TrainConfig {
            epochs: a.epochs,
            batch: a.batch,
            optimizer: AdamConfig {
                lr: a.lr,
                ..Default::default()
            },
            crop: a.crop,
            seed: a.seed,
            ..Default::default()
        },
        loss: LossConfig {
            gamma: a.gamma,
            delta: a.delta,
            lambda1: a.lambda1,
            lambda2: a.lambda2,
            ..Default::default()
        },
        supervision: a.supervision.config(),
        architecture: Architecture::default(),
    };
    cfg.train.validate()?;
    cfg.loss.validate()?;
    cfg.supervision.validate()?;
    let train_dir = a.data.join("train");
    let records = load_records(&train_dir)?;

    let mut net = init_network(cfg.architecture.clone(), a.seed)?;
    let total = cfg.train.epochs;
    let report = train_with_progress(&mut net, &records, &cfg.train, &cfg.loss, &cfg.supervision, |e| {
        if !a.quiet {
            eprintln!(
                "epoch {}/{total}: total {:.6} nsf {:.6} fp {:.6} reg {:.6}",
                e.epoch, e.total, e.nsf, e.fp, e.reg
            );
        }
    })?;

    create_dir(&a.out)?;
    let ckpt = a.out.join(CHECKPOINT_FILE);
    let curve = a.out.join(CURVE_FILE);
    store_checkpoint(&net, &ckpt)?;
    write_file(&curve, report.to_csv())?;
    let mut manifest = RunManifest::new("train", Some(a.seed), &cfg);
    manifest.inputs.push(train_dir);
    manifest.outputs.extend([ckpt.clone(), curve]);
    manifest.store(&a.out)?;
    println!("wrote {}", ckpt.display());
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let decode_cfg = match a.threshold {
        Some(t) if !(0.0..=1.0).contains(&t) => {
            return Err(Error::Config(format!("threshold must be in [0, 1], got {t}")));
        }
        Some(t) => DecodeConfig::default().with_threshold(t),
        None => DecodeConfig::default(),
    };
    let net = load_checkpoint(&a.model, Architecture::default())?;
    let test_dir = a.data.join("test");
    let test = load_records(&test_dir)?;
    let mut manifest = RunManifest::new(
        "eval",
        None,
        &serde_json::json!({ "decode": decode_cfg, "fixed_threshold": a.threshold.is_some() }),
    );
    manifest.inputs.push(a.model.clone());
    let evaluation = match a.threshold {
        Some(_) => evaluate_at(&net, &test, &decode_cfg)?,
        None => {
            let val_dir = a.data.join("val");
            let val = load_records(&val_dir)?;
            manifest.inputs.push(val_dir);
            evaluate_model(&net, &val, &test, &decode_cfg)?
        }
    };
    manifest.inputs.push(test_dir);

    create_dir(&a.out)?;
    let report_path = a.out.join(REPORT_FILE);
    let dets_path = a.out.join(DETECTIONS_FILE);
    let json = evaluation.report.to_json();
    write_file(&report_path, format!("{json}\n"))?;
    write_file(&dets_path, write_detections_jsonl(&evaluation.detections))?;
    manifest.outputs.extend([report_path, dets_path]);
    manifest.store(&a.out)?;
    if a.json {
        println!("{json}");
    } else {
        print!("{}", evaluation.report.to_table());
    }
    Ok(())
}

fn find_record(records: Vec<ImageRecord>, id: &str, dir: &Path) -> Result<ImageRecord> {
    records.into_iter().find(|r| r.id == id).ok_or_else(|| Error::Validation {
        id: id.into(),
        message: format!("no such image in {}", dir.display()),
    })
}

const DETECTION_RGB: [u8; 3] = [255, 0, 0];
const HEAD_RGB: [u8; 3] = [0, 255, 0];
const DETECTION_RADIUS: i64 = 3;

fn plot(a: &PlotArgs) -> Result<()> {
    let sup = a.supervision.config();
    sup.validate()?;
    let record = find_record(load_records(&a.data)?, &a.id, &a.data)?;
    let pixels = record.pixels.as_ref().expect("loaded records carry pixels");
    let mut overlay = RgbImage::from_gray(pixels, false);
    let mut manifest = RunManifest::new(
        "plot",
        None,
        &serde_json::json!({ "id": a.id, "threshold": a.threshold, "predicted": a.model.is_some(), "supervision": sup }),
    );
    manifest.inputs.push(pixel_path(&a.data, &a.id));

    let (heat, dens) = match &a.model {
        Some(model) => {
            let net = load_checkpoint(model, Architecture::default())?;
            manifest.inputs.push(model.clone());
            let pred = net.forward(pixels)?;
            for d in decode(&pred.heatmap, &DecodeConfig::default().with_threshold(a.threshold)) {
                overlay.draw_circle(d.x as i64, d.y as i64, DETECTION_RADIUS, DETECTION_RGB);
            }
            (pred.heatmap, pred.density)
        }
        None => {
            for p in &record.points {
                let r = (p.box_w.min(p.box_h) / 2.0).round().max(1.0) as i64;
                overlay.draw_circle(p.x.round() as i64, p.y.round() as i64, r, HEAD_RGB);
            }
            (make_heatmap(&record, &sup)?, make_density(&record, &sup)?)
        }
    };

    create_dir(&a.out)?;
    let heat_path = a.out.join(format!("{}_heatmap.pgm", a.id));
    let dens_path = a.out.join(format!("{}_density.pgm", a.id));
    let overlay_path = a.out.join(format!("{}_overlay.ppm", a.id));
    export_pgm(&heat, &heat_path, false)?;
    export_pgm(&dens, &dens_path, true)?;
    overlay.save(&overlay_path)?;
    manifest.outputs.extend([heat_path, dens_path, overlay_path]);
    manifest.store(&a.out)?;
    println!("wrote plots for {} to {}", a.id, a.out.display());
    Ok(())
}

/// 2 usage, 3 data/validation, 4 numerical abort.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::NonFiniteLoss { .. } | Error::NonFiniteOutput(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Targets(a) => targets(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
