//! Command-line entry points: data generation, auto-encoder
//! pretraining, training, completion inference, and evaluation.
//!
//! Configuration is a flat `key = value` file plus `KEY=VALUE`
//! command-line overrides (overrides win); the merged result is echoed
//! to `config.echo` so every run is reconstructible from its run
//! directory. Training runs one model per category: a single category
//! uses the run directory itself, several use one subdirectory each.
//! Exit codes: 0 success, 1 runtime failure, 2 divergence abort,
//! 3 usage or config error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use olat_core::config::TrainConfig;
use olat_core::step::Networks;

use crate::datagen::build_dataset;
use crate::error::{OlatError, Result};
use crate::evaluate::{complete_seed, evaluate_checkpoint};
use crate::formats::checkpoint::{load_checkpoint, Checkpoint};
use crate::formats::cloud::{read_cloud, write_cloud};
use crate::formats::manifest::{CloudRole, Manifest};
use crate::formats::report::save_report;
use crate::projection::save_projection;
use crate::trainer::{load_category_data, pretrain_ae, train_category};

/// Side length of projection-image panels, in pixels.
const PANEL: u32 = 220;

#[derive(Parser)]
#[command(name = "olat", version, about = "Unpaired point cloud completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the config-driven subcommands.
#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Run directory (default: $OLAT_RUN_DIR, then `run`).
    #[arg(long, value_name = "PATH")]
    run_dir: Option<PathBuf>,
    /// Config overrides, applied after the file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and its manifests.
    GenData(CommonArgs),
    /// Pretrain the complete-shape auto-encoder per category.
    PretrainAe(CommonArgs),
    /// Run the unpaired completion training loop per category.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint to resume from (single-category runs only).
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Complete one partial cloud, or every partial in a manifest.
    Complete {
        /// Trained checkpoint; it also carries the network config.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Input cloud file, or a `*.manifest` to complete in bulk.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Output cloud file (directory in manifest mode).
        #[arg(long, value_name = "PATH")]
        output: PathBuf,
        /// Also write an orthographic projection image (directory in
        /// manifest mode).
        #[arg(long, value_name = "PATH")]
        image: Option<PathBuf>,
    },
    /// Evaluate trained checkpoints and write `report.csv`.
    Eval(CommonArgs),
}

/// Parses `argv` and runs the selected subcommand, returning the
/// process exit code.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenData(common) => gen_data(&common),
        Command::PretrainAe(common) => per_category(&common, None, pretrain_one),
        Command::Train { common, resume } => per_category(&common, resume.as_deref(), train_one),
        Command::Complete { checkpoint, input, output, image } => {
            complete(&checkpoint, &input, &output, image.as_deref())
        }
        Command::Eval(common) => eval(&common),
    }
}

/// Merges defaults, the config file, and overrides, then validates.
fn load_config(common: &CommonArgs) -> Result<TrainConfig> {
    let as_config_error = |prefix: &str, e: olat_core::CoreError| {
        OlatError::Config(format!("{prefix}{e}"))
    };
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| OlatError::io(path, e))?;
            TrainConfig::parse(&text)
                .map_err(|e| as_config_error(&format!("{}: ", path.display()), e))?
        }
        None => TrainConfig::default(),
    };
    for entry in &common.overrides {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| OlatError::Config(format!("override `{entry}` is not KEY=VALUE")))?;
        cfg.apply(key.trim(), value.trim()).map_err(|e| as_config_error("", e))?;
    }
    cfg.validate().map_err(|e| as_config_error("", e))?;
    Ok(cfg)
}

/// Run directory: flag, then $OLAT_RUN_DIR, then `run`.
fn resolve_run_dir(common: &CommonArgs) -> PathBuf {
    common
        .run_dir
        .clone()
        .or_else(|| std::env::var_os("OLAT_RUN_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("run"))
}

/// Creates `dir` and echoes the merged config into it.
fn write_echo(dir: &Path, cfg: &TrainConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| OlatError::io(dir, e))?;
    crate::formats::write_bytes(&dir.join("config.echo"), cfg.echo().as_bytes())
}

/// The per-category working directory of a run.
fn category_dir(run_dir: &Path, cfg: &TrainConfig, category: &str) -> PathBuf {
    if cfg.categories.len() > 1 {
        run_dir.join(category)
    } else {
        run_dir.to_path_buf()
    }
}

fn gen_data(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    // The dataset directory is the artifact here, so the echo lives
    // beside the manifests rather than in a run directory.
    write_echo(Path::new(&cfg.data_dir), &cfg)?;
    let (train, eval) = build_dataset(&cfg)?;
    println!(
        "wrote {} train and {} eval entries under {}",
        train.entries.len(),
        eval.entries.len(),
        cfg.data_dir
    );
    Ok(())
}

/// Loads data and loops the per-category body over `cfg.categories`.
fn per_category(
    common: &CommonArgs,
    resume: Option<&Path>,
    body: fn(&TrainConfig, &crate::trainer::CategoryData, &Path, Option<&Path>) -> Result<()>,
) -> Result<()> {
    let cfg = load_config(common)?;
    if resume.is_some() && cfg.categories.len() > 1 {
        return Err(OlatError::Config("--resume needs a single-category config".into()));
    }
    let run_dir = resolve_run_dir(common);
    write_echo(&run_dir, &cfg)?;
    let data_dir = Path::new(&cfg.data_dir);
    let manifest = Manifest::load(&data_dir.join("train.manifest"))?;
    for category in &cfg.categories {
        let dir = category_dir(&run_dir, &cfg, category);
        std::fs::create_dir_all(&dir).map_err(|e| OlatError::io(&dir, e))?;
        let data = load_category_data(&cfg, data_dir, &manifest, category)?;
        println!(
            "[{category}] {} partials, {} completes -> {}",
            data.partials.len(),
            data.completes.len(),
            dir.display()
        );
        body(&cfg, &data, &dir, resume)?;
    }
    Ok(())
}

fn pretrain_one(
    cfg: &TrainConfig,
    data: &crate::trainer::CategoryData,
    dir: &Path,
    _resume: Option<&Path>,
) -> Result<()> {
    pretrain_ae(cfg, data, dir)
}

fn train_one(
    cfg: &TrainConfig,
    data: &crate::trainer::CategoryData,
    dir: &Path,
    resume: Option<&Path>,
) -> Result<()> {
    train_category(cfg, data, dir, resume)
}

fn eval(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    let run_dir = resolve_run_dir(common);
    write_echo(&run_dir, &cfg)?;
    let data_dir = Path::new(&cfg.data_dir);
    let mut rows = Vec::new();
    for category in &cfg.categories {
        let ckpt = category_dir(&run_dir, &cfg, category).join("ckpt_final.olat");
        rows.extend(evaluate_checkpoint(&ckpt, data_dir, cfg.tau, &[category.clone()])?);
    }
    let report = run_dir.join("report.csv");
    save_report(&report, &rows)?;
    println!("wrote {}", report.display());
    Ok(())
}

/// Completes `raw` with the checkpointed networks; `index` seeds the
/// deterministic input resampling.
fn complete_cloud(
    ck: &Checkpoint,
    nets: &Networks,
    raw: &olat_core::PointCloud,
    index: usize,
) -> Result<olat_core::PointCloud> {
    let seed = complete_seed(ck.config.seed, index);
    let resampled = olat_core::geometry::resample(raw, ck.config.n_points_in, seed)?;
    Ok(nets.complete(&resampled)?)
}

fn complete(checkpoint: &Path, input: &Path, output: &Path, image: Option<&Path>) -> Result<()> {
    let ck = load_checkpoint(checkpoint)?;
    let nets = Networks::load(&ck.config, &ck.sets)?;
    let manifest_mode =
        input.file_name().is_some_and(|n| n.to_string_lossy().ends_with(".manifest"));
    if !manifest_mode {
        let raw = read_cloud(input)?;
        let completed = complete_cloud(&ck, &nets, &raw, 0)?;
        write_cloud(output, &completed)?;
        if let Some(img) = image {
            save_projection(&completed, img, PANEL)?;
        }
        println!("wrote {}", output.display());
        return Ok(());
    }

    let manifest = Manifest::load(input)?;
    let data_dir = input.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(output).map_err(|e| OlatError::io(output, e))?;
    if let Some(img) = image {
        std::fs::create_dir_all(img).map_err(|e| OlatError::io(img, e))?;
    }
    let mut count = 0usize;
    for category in manifest.categories() {
        for (index, rel) in manifest.paths(category, CloudRole::Partial).iter().enumerate() {
            let raw = read_cloud(&data_dir.join(rel))?;
            let completed = complete_cloud(&ck, &nets, &raw, index)?;
            let stem = Path::new(rel)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("cloud_{index:03}"));
            let name = format!("{category}_{stem}_completed");
            write_cloud(&output.join(format!("{name}.pcb")), &completed)?;
            if let Some(img) = image {
                save_projection(&completed, &img.join(format!("{name}.png")), PANEL)?;
            }
            count += 1;
        }
    }
    println!("wrote {count} completions to {}", output.display());
    Ok(())
}
