//! The two-stage optimization: complete-shape auto-encoder pretraining,
//! then the unpaired main loop alternating critic and generator updates.
//!
//! Every batch is a pure function of (seed, step), so a fixed seed
//! yields an identical `train.log` byte-for-byte, and a resumed run
//! replays the exact batches an uninterrupted run would have seen.
//! Step records carry wall time for live inspection but the log lines
//! exclude it, keeping logs comparable across machines.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use olat_core::config::TrainConfig;
use olat_core::error::CoreError;
use olat_core::geometry::{make_occlusion_series, resample, OcclusionSeries, PointCloud};
use olat_core::losses::{total_losses, LossBreakdown};
use olat_core::models::Role;
use olat_core::optim::{clip_global_norm, Adam, AdamState};
use olat_core::rng::{mix, stream, TAG_COMPLETE_BATCH, TAG_GP_EPS, TAG_SHUFFLE};
use olat_core::step::{ae_step, discriminator_step, generator_step, DiscOut, Networks};
use rand::RngCore;

use crate::datagen::load_clouds;
use crate::error::{OlatError, Result};
use crate::formats::checkpoint::{load_checkpoint, save_checkpoint};
use crate::formats::manifest::{CloudRole, Manifest};
use crate::formats::FormatViolation;

/// Resample salt for training partials.
const SALT_RESAMPLE_PARTIAL: u64 = 0x21;
/// Resample salt for training completes.
const SALT_RESAMPLE_COMPLETE: u64 = 0x22;
/// Per-(step, slot) occlusion-series salt.
const SALT_SERIES: u64 = 0x23;
/// Master-seed salt separating AE batches from main-loop batches.
const SALT_AE: u64 = 0x24;

/// One logged training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: u64,
    /// The step's loss decomposition.
    pub losses: LossBreakdown,
    /// Batch means of the occlusion codes of the three series members.
    pub o_mean: [f64; 3],
    /// Wall time of the step in milliseconds; not serialized.
    pub wall_ms: f64,
}

/// Column header of `train.log` and `pretrain.log`.
pub const LOG_HEADER: &str =
    "step\trec\tz_equal\tnpair\tg_point\tg_code\td_point\td_code\ttotal_g\ttotal_d\to_base\to_mid\to_small";

impl StepRecord {
    /// Serializes the logged columns (wall time excluded).
    pub fn log_line(&self) -> String {
        let l = &self.losses;
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.step,
            l.rec,
            l.z_equal,
            l.npair,
            l.g_point,
            l.g_code,
            l.d_point,
            l.d_code,
            l.total_g,
            l.total_d,
            self.o_mean[0],
            self.o_mean[1],
            self.o_mean[2]
        )
    }

    /// Parses one log line; `wall_ms` comes back as zero.
    pub fn parse_line(line: &str) -> core::result::Result<Self, FormatViolation> {
        let base = line.as_ptr() as usize;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 13 {
            return Err(FormatViolation::at(0, format!("expected 13 columns, got {}", cols.len())));
        }
        let off = |tok: &str| (tok.as_ptr() as usize - base) as u64;
        let step: u64 = cols[0]
            .parse()
            .map_err(|_| FormatViolation::at(0, format!("bad step `{}`", cols[0])))?;
        let mut vals = [0.0f64; 12];
        for (v, tok) in vals.iter_mut().zip(&cols[1..]) {
            *v = tok
                .parse()
                .map_err(|_| FormatViolation::at(off(tok), format!("bad value `{tok}`")))?;
        }
        Ok(StepRecord {
            step,
            losses: LossBreakdown {
                rec: vals[0],
                z_equal: vals[1],
                npair: vals[2],
                g_point: vals[3],
                g_code: vals[4],
                d_point: vals[5],
                d_code: vals[6],
                total_g: vals[7],
                total_d: vals[8],
            },
            o_mean: [vals[9], vals[10], vals[11]],
            wall_ms: 0.0,
        })
    }
}

/// Reads a log file back into records, skipping the header.
pub fn read_log(path: &Path) -> Result<Vec<StepRecord>> {
    let bytes = crate::formats::read_bytes(path)?;
    let text = core::str::from_utf8(&bytes).map_err(|e| {
        FormatViolation::at(e.valid_up_to() as u64, "not valid UTF-8").into_error(path)
    })?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.is_empty() || line == LOG_HEADER {
            continue;
        }
        out.push(StepRecord::parse_line(line).map_err(|v| v.into_error(path))?);
    }
    Ok(out)
}

/// Append-or-create log writer; the header is written only on creation.
struct LogFile {
    file: std::io::BufWriter<std::fs::File>,
    path: std::path::PathBuf,
}

impl LogFile {
    fn open(path: &Path, append: bool) -> Result<Self> {
        let exists = path.exists();
        let file = if append {
            std::fs::OpenOptions::new().create(true).append(true).open(path)
        } else {
            std::fs::File::create(path)
        }
        .map_err(|e| OlatError::io(path, e))?;
        let mut log = LogFile { file: std::io::BufWriter::new(file), path: path.to_path_buf() };
        if !(append && exists) {
            log.write_line(LOG_HEADER)?;
        }
        Ok(log)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.file, "{line}").map_err(|e| OlatError::io(&self.path, e))
    }

    fn record(&mut self, r: &StepRecord) -> Result<()> {
        self.write_line(&r.log_line())?;
        self.file.flush().map_err(|e| OlatError::io(&self.path, e))
    }
}

/// One category's training clouds, resampled to the working sizes.
pub struct CategoryData {
    /// Occluded inputs at `n_points_in`.
    pub partials: Vec<PointCloud>,
    /// Unpaired complete shapes at `n_points_out`.
    pub completes: Vec<PointCloud>,
}

/// Loads and resamples a category's training clouds.
pub fn load_category_data(
    cfg: &TrainConfig,
    data_dir: &Path,
    manifest: &Manifest,
    category: &str,
) -> Result<CategoryData> {
    let resample_all = |clouds: Vec<PointCloud>, m: usize, salt: u64| -> Result<Vec<PointCloud>> {
        clouds
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                resample(&c, m, mix(cfg.seed ^ mix(salt ^ mix(i as u64)))).map_err(OlatError::from)
            })
            .collect()
    };
    let partials = load_clouds(data_dir, manifest, category, CloudRole::Partial)?;
    let completes = load_clouds(data_dir, manifest, category, CloudRole::Complete)?;
    Ok(CategoryData {
        partials: resample_all(partials, cfg.n_points_in, SALT_RESAMPLE_PARTIAL)?,
        completes: resample_all(completes, cfg.n_points_out, SALT_RESAMPLE_COMPLETE)?,
    })
}

/// Steps needed for `epochs` passes over `n_items` at the batch size,
/// honoring a hard cap (0 means uncapped).
fn planned_steps(n_items: usize, epochs: usize, batch_size: usize, cap: u64) -> u64 {
    let per_epoch = n_items.div_ceil(batch_size) as u64;
    let total = per_epoch.saturating_mul(epochs as u64);
    if cap > 0 {
        total.min(cap)
    } else {
        total
    }
}

/// Draws a with-replacement batch of clouds from a pool.
fn draw_clouds(pool: &[PointCloud], n: usize, mut rng: impl RngCore) -> Vec<PointCloud> {
    (0..n).map(|_| pool[(rng.next_u64() % pool.len() as u64) as usize].clone()).collect()
}

/// Builds the step's occlusion-series batch from the partial pool.
fn batch_series(
    cfg: &TrainConfig,
    data: &CategoryData,
    step: u64,
) -> core::result::Result<Vec<OcclusionSeries>, CoreError> {
    let mut pick = stream(cfg.seed, TAG_SHUFFLE, step);
    (0..cfg.batch_size)
        .map(|slot| {
            let idx = (pick.next_u64() % data.partials.len() as u64) as usize;
            let seed = mix(cfg.seed ^ mix(SALT_SERIES ^ mix(step ^ mix(slot as u64))));
            make_occlusion_series(&data.partials[idx], cfg.k_removal, seed)
        })
        .collect()
}

/// Saves the abort checkpoint (params are still finite: losses and
/// gradient norms are checked before any update applies) and builds the
/// divergence error.
fn abort_divergence(
    run_dir: &Path,
    cfg: &TrainConfig,
    nets: &Networks,
    optimizers: &[(String, AdamState)],
    step: u64,
    what: &str,
) -> OlatError {
    let sets = nets.to_parameter_sets();
    if sets.iter().all(|s| s.validate().is_ok()) {
        let _ = save_checkpoint(&run_dir.join("ckpt_diverged.olat"), step, cfg, &sets, optimizers);
    }
    OlatError::Divergence(format!("step {step}: {what}"))
}

/// Binds the main loop's optimizers to their checkpoint names.
fn optimizer_states(adam_g: &Adam, adam_d: &Adam) -> Vec<(String, AdamState)> {
    vec![("adam_g".to_string(), adam_g.export()), ("adam_d".to_string(), adam_d.export())]
}

/// Restores one optimizer from the checkpoint, validating that the
/// moment buffers line up with the tensors it will drive.
fn restore_optimizer(
    adam: &mut Adam,
    ck: &crate::formats::checkpoint::Checkpoint,
    name: &str,
    tensors: &[olat_core::nn::TensorMut<'_>],
) -> Result<()> {
    let state = ck
        .optimizers
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, s)| s.clone())
        .ok_or_else(|| OlatError::Config(format!("checkpoint carries no `{name}` state")))?;
    let shapes_match = state.slots.is_empty()
        || (state.slots.len() == tensors.len()
            && state.slots.iter().zip(tensors).all(|((m, _), t)| m.len() == t.data.len()));
    if !shapes_match {
        return Err(OlatError::Config(format!(
            "checkpoint `{name}` state does not match the configured networks"
        )));
    }
    adam.restore(state);
    Ok(())
}

/// Pretrains the complete auto-encoder (E_c plus its own decoder) by
/// Chamfer reconstruction and writes `pretrain.log` and `ckpt_ae.olat`.
pub fn pretrain_ae(cfg: &TrainConfig, data: &CategoryData, run_dir: &Path) -> Result<()> {
    if data.completes.is_empty() {
        return Err(OlatError::Config("auto-encoder pretraining needs complete shapes".into()));
    }
    let mut nets = Networks::init(cfg, cfg.seed);
    let mut adam = Adam::new(cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    let total = planned_steps(data.completes.len(), cfg.ae_epochs, cfg.batch_size, cfg.ae_max_steps);
    let log_every = cfg.log_every.max(1);
    let mut log = LogFile::open(&run_dir.join("pretrain.log"), false)?;
    for s in 1..=total {
        let t0 = Instant::now();
        let batch = draw_clouds(
            &data.completes,
            cfg.batch_size,
            stream(mix(cfg.seed ^ SALT_AE), TAG_COMPLETE_BATCH, s),
        );
        let abort = |nets: &Networks, adam: &Adam, what: &str| {
            let states = vec![("adam_ae".to_string(), adam.export())];
            abort_divergence(run_dir, cfg, nets, &states, s, what)
        };
        let rec = match ae_step(&mut nets, &batch) {
            Ok(v) => v,
            Err(CoreError::NonFinite(t)) => {
                return Err(abort(&nets, &adam, &format!("non-finite {t}")))
            }
            Err(e) => return Err(e.into()),
        };
        let norm = clip_global_norm(&mut nets.ae_tensors_mut(), cfg.grad_clip);
        if !norm.is_finite() {
            return Err(abort(&nets, &adam, "non-finite gradient norm"));
        }
        adam.step(&mut nets.ae_tensors_mut());
        // The AE objective is plain reconstruction, so the record's
        // totals use unit weight on the rec slot.
        let losses = total_losses(rec, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)?;
        if s % log_every == 0 || s == total {
            let record = StepRecord {
                step: s,
                losses,
                o_mean: [0.0; 3],
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            };
            log.record(&record)?;
        }
    }
    let sets: Vec<_> = nets
        .to_parameter_sets()
        .into_iter()
        .filter(|s| matches!(s.role, Role::CompleteEncoder | Role::AeDecoder))
        .collect();
    save_checkpoint(&run_dir.join("ckpt_ae.olat"), total, cfg, &sets, &[])
}

/// Runs the main unpaired loop for one category, writing `train.log`,
/// periodic checkpoints, and `ckpt_final.olat`. With `resume`, training
/// continues from the checkpoint's step and appends to the log.
pub fn train_category(
    cfg: &TrainConfig,
    data: &CategoryData,
    run_dir: &Path,
    resume: Option<&Path>,
) -> Result<()> {
    if data.partials.is_empty() {
        return Err(OlatError::Config("training needs partial shapes".into()));
    }
    let needs_reals = cfg.enable_point_d || cfg.enable_code_d;
    if needs_reals && data.completes.is_empty() {
        return Err(OlatError::Config(
            "discriminator training needs unpaired complete shapes".into(),
        ));
    }

    let mut adam_g = Adam::new(cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    let mut adam_d = Adam::new(cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    let (mut nets, start) = match resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            let mut nets = Networks::load(cfg, &ck.sets)?;
            restore_optimizer(&mut adam_g, &ck, "adam_g", &nets.generator_tensors_mut())?;
            restore_optimizer(&mut adam_d, &ck, "adam_d", &nets.discriminator_tensors_mut())?;
            (nets, ck.step)
        }
        None => {
            let mut nets = Networks::init(cfg, cfg.seed);
            if cfg.enable_code_d || cfg.init_dc_from_ae {
                let ae_path = run_dir.join("ckpt_ae.olat");
                if !ae_path.exists() {
                    return Err(OlatError::Config(format!(
                        "{}: pretrained auto-encoder required (run pretrain-ae first)",
                        ae_path.display()
                    )));
                }
                let ck = load_checkpoint(&ae_path)?;
                for set in &ck.sets {
                    if matches!(set.role, Role::CompleteEncoder | Role::AeDecoder) {
                        nets.by_role_mut(set.role).load_parameter_set(set)?;
                    }
                }
                if cfg.init_dc_from_ae {
                    let ae_dec = ck
                        .sets
                        .iter()
                        .find(|s| s.role == Role::AeDecoder)
                        .ok_or_else(|| {
                            OlatError::Config(format!(
                                "{}: no auto-encoder decoder in checkpoint",
                                ae_path.display()
                            ))
                        })?;
                    let mut retagged = ae_dec.clone();
                    retagged.role = Role::CompleteDecoder;
                    nets.by_role_mut(Role::CompleteDecoder).load_parameter_set(&retagged)?;
                }
            }
            (nets, 0)
        }
    };

    let total = planned_steps(data.partials.len(), cfg.epochs, cfg.batch_size, cfg.max_steps);
    let log_every = cfg.log_every.max(1);
    let mut log = LogFile::open(&run_dir.join("train.log"), start > 0)?;

    for s in (start + 1)..=total {
        let t0 = Instant::now();
        let series = match batch_series(cfg, data, s) {
            Ok(v) => v,
            Err(e) => return Err(e.into()),
        };

        let mut d_out = DiscOut { d_point: 0.0, d_code: 0.0 };
        if needs_reals {
            for j in 0..cfg.d_steps_per_g {
                let sub = s * cfg.d_steps_per_g as u64 + j as u64;
                let reals = draw_clouds(
                    &data.completes,
                    cfg.batch_size,
                    stream(cfg.seed, TAG_COMPLETE_BATCH, sub),
                );
                let mut gp_rng = stream(cfg.seed, TAG_GP_EPS, sub);
                d_out = match discriminator_step(cfg, &mut nets, &series, &reals, &mut gp_rng) {
                    Ok(v) => v,
                    Err(CoreError::NonFinite(t)) => {
                        let states = optimizer_states(&adam_g, &adam_d);
                        return Err(abort_divergence(
                            run_dir,
                            cfg,
                            &nets,
                            &states,
                            s,
                            &format!("non-finite {t}"),
                        ));
                    }
                    Err(e) => return Err(e.into()),
                };
                let norm = clip_global_norm(&mut nets.discriminator_tensors_mut(), cfg.grad_clip);
                if !norm.is_finite() {
                    let states = optimizer_states(&adam_g, &adam_d);
                    return Err(abort_divergence(
                        run_dir,
                        cfg,
                        &nets,
                        &states,
                        s,
                        "non-finite critic gradient norm",
                    ));
                }
                adam_d.step(&mut nets.discriminator_tensors_mut());
            }
        }

        let g_out = match generator_step(cfg, &mut nets, &series) {
            Ok(v) => v,
            Err(CoreError::NonFinite(t)) => {
                let states = optimizer_states(&adam_g, &adam_d);
                return Err(abort_divergence(
                    run_dir,
                    cfg,
                    &nets,
                    &states,
                    s,
                    &format!("non-finite {t}"),
                ));
            }
            Err(e) => return Err(e.into()),
        };
        let norm = clip_global_norm(&mut nets.generator_tensors_mut(), cfg.grad_clip);
        if !norm.is_finite() {
            let states = optimizer_states(&adam_g, &adam_d);
            return Err(abort_divergence(
                run_dir,
                cfg,
                &nets,
                &states,
                s,
                "non-finite generator gradient norm",
            ));
        }
        adam_g.step(&mut nets.generator_tensors_mut());

        let losses = total_losses(
            g_out.rec,
            g_out.z_equal,
            g_out.npair,
            g_out.g_point,
            g_out.g_code,
            d_out.d_point,
            d_out.d_code,
            cfg.gamma,
            cfg.beta,
        )?;
        if cfg.ckpt_every > 0 && s % cfg.ckpt_every == 0 {
            let name = format!("ckpt_{s:06}.olat");
            let states = optimizer_states(&adam_g, &adam_d);
            save_checkpoint(&run_dir.join(name), s, cfg, &nets.to_parameter_sets(), &states)?;
        }
        if s % log_every == 0 || s == total {
            let record = StepRecord {
                step: s,
                losses,
                o_mean: g_out.o_mean,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            };
            log.record(&record)?;
        }
    }

    let states = optimizer_states(&adam_g, &adam_d);
    save_checkpoint(
        &run_dir.join("ckpt_final.olat"),
        total.max(start),
        cfg,
        &nets.to_parameter_sets(),
        &states,
    )
}
