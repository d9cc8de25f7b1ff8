//! Checkpoint evaluation: completes held-out partials and reports
//! chamfer, F1, unidirectional chamfer, and minimum matching distance.
//!
//! Paired metrics (chamfer, F1) need ground truth, which only the eval
//! split carries; without it those columns stay empty and the matching
//! distance falls back to the training completes as its reference set.

use std::path::Path;

use olat_core::config::TrainConfig;
use olat_core::geometry::{resample, PointCloud};
use olat_core::metrics::{chamfer, f1_score, mmd, ucd};
use olat_core::rng::{mix, TAG_EVAL};
use olat_core::step::Networks;

use crate::datagen::load_clouds;
use crate::error::{OlatError, Result};
use crate::formats::checkpoint::load_checkpoint;
use crate::formats::manifest::{CloudRole, Manifest};
use crate::formats::report::ReportRow;

/// One category's evaluation clouds.
pub struct EvalInputs<'a> {
    /// Raw held-out partials, in manifest order.
    pub partials: &'a [PointCloud],
    /// Paired ground truth, when the split carries it.
    pub ground_truth: Option<&'a [PointCloud]>,
    /// Reference set for the matching-distance metric.
    pub references: &'a [PointCloud],
}

/// Deterministic per-item seed for completion-time input resampling.
pub fn complete_seed(master: u64, item: usize) -> u64 {
    mix(master ^ mix(TAG_EVAL ^ mix(item as u64)))
}

/// Completes every partial and aggregates the category's metrics.
///
/// Reported chamfer columns are scaled by 1e4 and the matching distance
/// by 1e2, matching the usual presentation of these metrics.
pub fn evaluate_category(
    nets: &Networks,
    cfg: &TrainConfig,
    tau: f64,
    inputs: &EvalInputs,
    category: &str,
) -> Result<ReportRow> {
    if inputs.partials.is_empty() {
        return Err(OlatError::Config(format!("category {category}: no eval partials")));
    }
    if let Some(gt) = inputs.ground_truth {
        if gt.len() != inputs.partials.len() {
            return Err(OlatError::Config(format!(
                "category {category}: {} partials but {} ground-truth shapes",
                inputs.partials.len(),
                gt.len()
            )));
        }
    }

    let n = inputs.partials.len() as f64;
    let mut completions = Vec::with_capacity(inputs.partials.len());
    let mut cd_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut ucd_sum = 0.0;
    for (i, raw) in inputs.partials.iter().enumerate() {
        let p_in = resample(raw, cfg.n_points_in, complete_seed(cfg.seed, i))?;
        let chat = nets.complete(&p_in)?;
        ucd_sum += ucd(raw, &chat);
        if let Some(gt) = inputs.ground_truth {
            cd_sum += chamfer(&chat, &gt[i]);
            f1_sum += f1_score(&chat, &gt[i], tau)?;
        }
        completions.push(chat);
    }

    if inputs.references.is_empty() {
        return Err(OlatError::Config(format!(
            "category {category}: no reference shapes for the matching distance"
        )));
    }
    let mmd_x1e2 = mmd(&completions, inputs.references)? * 1e2;
    let (cd_x1e4, f1) = match inputs.ground_truth {
        Some(_) => (Some(cd_sum / n * 1e4), Some(f1_sum / n)),
        None => (None, None),
    };
    Ok(ReportRow {
        category: category.to_string(),
        cd_x1e4,
        f1,
        ucd_x1e4: ucd_sum / n * 1e4,
        mmd_x1e2,
        tau,
    })
}

/// Evaluates a trained checkpoint over the eval split of `data_dir`,
/// one report row per requested category (all categories when empty).
pub fn evaluate_checkpoint(
    ckpt_path: &Path,
    data_dir: &Path,
    tau: f64,
    categories: &[String],
) -> Result<Vec<ReportRow>> {
    let ck = load_checkpoint(ckpt_path)?;
    let nets = Networks::load(&ck.config, &ck.sets)?;
    let eval_manifest = Manifest::load(&data_dir.join("eval.manifest"))?;
    let train_manifest_path = data_dir.join("train.manifest");

    let resolved: Vec<String> = if categories.is_empty() {
        eval_manifest.categories().into_iter().map(str::to_string).collect()
    } else {
        categories.to_vec()
    };
    if resolved.is_empty() {
        return Err(OlatError::Config("eval manifest lists no categories".into()));
    }

    let mut rows = Vec::with_capacity(resolved.len());
    for cat in &resolved {
        let partials = load_clouds(data_dir, &eval_manifest, cat, CloudRole::Partial)?;
        let gts = load_clouds(data_dir, &eval_manifest, cat, CloudRole::GroundTruth)?;
        let refs = if gts.is_empty() {
            if train_manifest_path.exists() {
                let train_manifest = Manifest::load(&train_manifest_path)?;
                load_clouds(data_dir, &train_manifest, cat, CloudRole::Complete)?
            } else {
                Vec::new()
            }
        } else {
            gts.clone()
        };
        let inputs = EvalInputs {
            partials: &partials,
            ground_truth: if gts.is_empty() { None } else { Some(&gts) },
            references: &refs,
        };
        rows.push(evaluate_category(&nets, &ck.config, tau, &inputs, cat)?);
    }
    Ok(rows)
}
