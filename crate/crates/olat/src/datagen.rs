//! Synthetic dataset generation under the unpaired regime.
//!
//! Per category three disjoint instance pools are drawn: training
//! partials (whose source completes are discarded and never written),
//! training completes, and paired evaluation (partial, ground truth)
//! instances. Every instance is a pure function of the master seed, so
//! regeneration is byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use olat_core::config::TrainConfig;
use olat_core::geometry::PointCloud;
use olat_core::rng::{mix, stream, TAG_PARTIAL, TAG_SHAPE};
use olat_core::shapes::{make_partial, sample_shape, Category, ShapeSpec};
use rand::Rng;

use crate::error::{OlatError, Result};
use crate::formats::cloud::write_cloud;
use crate::formats::manifest::{CloudRole, Manifest, ManifestEntry};

/// Instance-pool salts; distinct pools never share a shape.
const SALT_TRAIN_PARTIAL: u64 = 0x11;
const SALT_TRAIN_COMPLETE: u64 = 0x12;
const SALT_EVAL: u64 = 0x13;

/// Deterministic per-instance seed, injective over (category, pool, index).
fn instance_seed(master: u64, cat_idx: usize, salt: u64, index: usize) -> u64 {
    mix(master ^ mix(salt ^ mix(((cat_idx as u64) << 32) | index as u64)))
}

/// Draws one complete shape of the category.
fn generate_complete(
    cat: Category,
    cfg: &TrainConfig,
    inst: u64,
) -> Result<PointCloud> {
    // Index 1: index 0 of this tag is consumed inside `sample_shape`.
    let mut rng = stream(inst, TAG_SHAPE, 1);
    let spec = ShapeSpec::random(cat, cfg.sample_points, &mut rng);
    Ok(sample_shape(&spec, inst)?)
}

/// Cuts a partial view with a severity drawn from the configured range.
fn generate_partial(complete: &PointCloud, cfg: &TrainConfig, inst: u64) -> Result<PointCloud> {
    // Index 1: index 0 of this tag is consumed inside `make_partial`.
    let mut rng = stream(inst, TAG_PARTIAL, 1);
    let severity = rng.gen_range(cfg.severity_min..=cfg.severity_max);
    Ok(make_partial(complete, cfg.partial_mode, severity, inst)?)
}

/// Generates every category's files under `cfg.data_dir` and writes the
/// `train.manifest` and `eval.manifest` indices (atomically, last).
/// Returns the two manifests.
pub fn build_dataset(cfg: &TrainConfig) -> Result<(Manifest, Manifest)> {
    let root = PathBuf::from(&cfg.data_dir);
    let mut train = Manifest { split: "train".into(), seed: cfg.seed, entries: Vec::new() };
    let mut eval = Manifest { split: "eval".into(), seed: cfg.seed, entries: Vec::new() };

    for (cat_idx, name) in cfg.categories.iter().enumerate() {
        let cat = Category::parse(name).map_err(|e| OlatError::Config(e.to_string()))?;
        let dir = root.join(name);
        fs::create_dir_all(&dir).map_err(|e| OlatError::io(&dir, e))?;

        let emit = |manifest: &mut Manifest,
                    role: CloudRole,
                    file: String,
                    cloud: &PointCloud|
         -> Result<()> {
            write_cloud(&dir.join(&file), cloud)?;
            manifest.entries.push(ManifestEntry {
                role,
                category: name.clone(),
                path: format!("{name}/{file}"),
            });
            Ok(())
        };

        // Training partials: the source completes are never written.
        for i in 0..cfg.n_train_partial {
            let inst = instance_seed(cfg.seed, cat_idx, SALT_TRAIN_PARTIAL, i);
            let complete = generate_complete(cat, cfg, inst)?;
            let partial = generate_partial(&complete, cfg, inst)?;
            emit(&mut train, CloudRole::Partial, format!("train_partial_{i:03}.pcb"), &partial)?;
        }
        // Unpaired training completes: a disjoint instance pool.
        for i in 0..cfg.n_train_complete {
            let inst = instance_seed(cfg.seed, cat_idx, SALT_TRAIN_COMPLETE, i);
            let complete = generate_complete(cat, cfg, inst)?;
            emit(
                &mut train,
                CloudRole::Complete,
                format!("train_complete_{i:03}.pcb"),
                &complete,
            )?;
        }
        // Paired evaluation split: partial plus its ground truth.
        for i in 0..cfg.n_eval {
            let inst = instance_seed(cfg.seed, cat_idx, SALT_EVAL, i);
            let complete = generate_complete(cat, cfg, inst)?;
            let partial = generate_partial(&complete, cfg, inst)?;
            emit(&mut eval, CloudRole::Partial, format!("eval_partial_{i:03}.pcb"), &partial)?;
            emit(&mut eval, CloudRole::GroundTruth, format!("eval_gt_{i:03}.pcb"), &complete)?;
        }
    }

    train.save(&root.join("train.manifest"))?;
    eval.save(&root.join("eval.manifest"))?;
    Ok((train, eval))
}

/// Loads the clouds behind a manifest's (category, role) selection, in
/// manifest order.
pub fn load_clouds(
    data_dir: &Path,
    manifest: &Manifest,
    category: &str,
    role: CloudRole,
) -> Result<Vec<PointCloud>> {
    manifest
        .paths(category, role)
        .into_iter()
        .map(|rel| crate::formats::cloud::read_cloud(&data_dir.join(rel)))
        .collect()
}
