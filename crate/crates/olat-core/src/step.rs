//! Batch-level training passes: the complete auto-encoder, the critics,
//! and the generator side of the completion model.
//!
//! Each pass zeroes the gradients of the networks it owns, runs forward,
//! accumulates exact reverse-mode gradients, and returns the scalar loss
//! terms. Orchestration — batching, optimization, logging — lives in the
//! companion crate; everything numerical is here.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{GpMode, RankingMode, TrainConfig};
use crate::error::{CoreError, CoreResult};
use crate::geometry::{OcclusionSeries, PointCloud};
use crate::losses::{
    chamfer_with_grad, penalty_coefficient, penalty_grad_norm, ranking_loss_grad,
    reconstruction_loss_grad, smooth_l1_grad, triplet_rank_loss_grad, wgan_d_loss, wgan_g_loss,
};
use crate::models::{
    fuse, fuse_backward, CodeDiscriminator, CompleteEncoder, Decoder, ParameterSet,
    PartialEncoder, PointDiscriminator, Network, Role,
};
use crate::nn::{Mat, TensorMut};

/// Every network in the system, built to one config.
pub struct Networks {
    /// E_p: partial cloud to (z, o).
    pub enc_p: PartialEncoder,
    /// E_c: complete cloud to z; trained only during AE pretraining.
    pub enc_c: CompleteEncoder,
    /// D_c decoder: z to completed cloud.
    pub dec_c: Decoder,
    /// D_p decoder: fused (z, o) back to the partial cloud.
    pub dec_p: Decoder,
    /// Auto-encoder decoder: z to complete cloud, pretraining only.
    pub dec_ae: Decoder,
    /// Point critic on completed clouds.
    pub disc_p: PointDiscriminator,
    /// Code critic on shape codes.
    pub disc_c: CodeDiscriminator,
}

impl Networks {
    /// Builds all networks with zeroed parameters.
    pub fn build(cfg: &TrainConfig) -> Self {
        Self {
            enc_p: PartialEncoder::build(cfg),
            enc_c: CompleteEncoder::build(cfg),
            dec_c: Decoder::build(Role::CompleteDecoder, cfg.d, cfg.n_points_out, &cfg.dec_widths),
            dec_p: Decoder::build(
                Role::PartialDecoder,
                cfg.fused_dim(),
                cfg.n_points_in,
                &cfg.dec_widths,
            ),
            dec_ae: Decoder::build(Role::AeDecoder, cfg.d, cfg.n_points_out, &cfg.dec_widths),
            disc_p: PointDiscriminator::build(cfg),
            disc_c: CodeDiscriminator::build(cfg),
        }
    }

    /// Builds and deterministically initializes every network from the
    /// master seed.
    pub fn init(cfg: &TrainConfig, master_seed: u64) -> Self {
        let mut nets = Self::build(cfg);
        for net in nets.all_mut() {
            net.init_params(master_seed);
        }
        nets
    }

    /// Builds networks and loads the given parameter sets (one per role).
    pub fn load(cfg: &TrainConfig, sets: &[ParameterSet]) -> CoreResult<Self> {
        let mut nets = Self::build(cfg);
        if sets.len() != 7 {
            return Err(CoreError::InvalidArgument(alloc::format!(
                "expected 7 parameter sets, got {}",
                sets.len()
            )));
        }
        for set in sets {
            let net = nets.by_role_mut(set.role);
            net.load_parameter_set(set)?;
        }
        Ok(nets)
    }

    /// All networks in role order.
    pub fn all_mut(&mut self) -> [&mut dyn Network; 7] {
        [
            &mut self.enc_p,
            &mut self.enc_c,
            &mut self.dec_c,
            &mut self.dec_p,
            &mut self.dec_ae,
            &mut self.disc_p,
            &mut self.disc_c,
        ]
    }

    /// The network carrying `role`.
    pub fn by_role_mut(&mut self, role: Role) -> &mut dyn Network {
        match role {
            Role::PartialEncoder => &mut self.enc_p,
            Role::CompleteEncoder => &mut self.enc_c,
            Role::CompleteDecoder => &mut self.dec_c,
            Role::PartialDecoder => &mut self.dec_p,
            Role::AeDecoder => &mut self.dec_ae,
            Role::PointDiscriminator => &mut self.disc_p,
            Role::CodeDiscriminator => &mut self.disc_c,
        }
    }

    /// Snapshots every network as a parameter set, role order.
    pub fn to_parameter_sets(&self) -> Vec<ParameterSet> {
        [
            self.enc_p.to_parameter_set(),
            self.enc_c.to_parameter_set(),
            self.dec_c.to_parameter_set(),
            self.dec_p.to_parameter_set(),
            self.dec_ae.to_parameter_set(),
            self.disc_p.to_parameter_set(),
            self.disc_c.to_parameter_set(),
        ]
        .into()
    }

    /// Parameter/gradient views of the generator group: E_p, D_c, D_p.
    /// E_c stays frozen after pretraining and is not part of this group.
    pub fn generator_tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut t = self.enc_p.tensors_mut();
        t.extend(self.dec_c.tensors_mut());
        t.extend(self.dec_p.tensors_mut());
        t
    }

    /// Parameter/gradient views of both critics.
    pub fn discriminator_tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut t = self.disc_p.tensors_mut();
        t.extend(self.disc_c.tensors_mut());
        t
    }

    /// Parameter/gradient views of the complete auto-encoder.
    pub fn ae_tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut t = self.enc_c.tensors_mut();
        t.extend(self.dec_ae.tensors_mut());
        t
    }

    /// Completes a partial cloud: encode to z, decode with D_c. The
    /// occlusion code is dropped, exactly as at inference time.
    pub fn complete(&self, partial: &PointCloud) -> CoreResult<PointCloud> {
        let code = self.enc_p.encode(partial)?;
        self.dec_c.decode(&code.z)
    }
}

/// One auto-encoder pretraining pass over a batch of complete clouds:
/// mean Chamfer reconstruction through E_c and the AE decoder.
/// Accumulates gradients into those two networks and returns the loss.
pub fn ae_step(nets: &mut Networks, reals: &[PointCloud]) -> CoreResult<f64> {
    if reals.is_empty() {
        return Err(CoreError::InvalidArgument("ae_step needs a non-empty batch".into()));
    }
    nets.enc_c.zero_grad();
    nets.dec_ae.zero_grad();
    let scale = 1.0 / reals.len() as f64;
    let mut total = 0.0;
    for y in reals {
        let (z, enc_cache) = nets.enc_c.encode_cache(y)?;
        let (y_hat, dec_cache) = nets.dec_ae.decode_cache(&z)?;
        let (v, mut g_pts) = chamfer_with_grad(y, &y_hat);
        total += v * scale;
        for g in &mut g_pts {
            for a in 0..3 {
                g[a] *= scale;
            }
        }
        let dz = nets.dec_ae.backward(&dec_cache, &g_pts);
        nets.enc_c.backward(&enc_cache, &dz);
    }
    if !total.is_finite() {
        return Err(CoreError::NonFinite("ae reconstruction"));
    }
    Ok(total)
}

/// Raw (unweighted) generator-side loss terms, batch-meaned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOut {
    /// Reconstruction: own Eq-style terms for every series member plus
    /// the swap terms when enabled.
    pub rec: f64,
    /// Smooth-L1 agreement between the series' shape codes.
    pub z_equal: f64,
    /// Occlusion-code ranking term.
    pub npair: f64,
    /// Point-critic generator term, −mean score over completions.
    pub g_point: f64,
    /// Code-critic generator term, −mean score over shape codes.
    pub g_code: f64,
    /// Batch means of mean(o), mean(o′), mean(o″) — the occlusion-code
    /// ordering statistic.
    pub o_mean: [f64; 3],
}

/// Critic-side loss terms (gradient penalties included), batch-meaned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscOut {
    /// Point-critic objective.
    pub d_point: f64,
    /// Code-critic objective.
    pub d_code: f64,
}

struct MemberPass {
    code: crate::models::CodePair,
    enc_cache: crate::models::EncoderCache,
    dc_cache: crate::nn::MlpCache,
    dp_cache: crate::nn::MlpCache,
    g_p_hat: Vec<[f64; 3]>,
    g_c_hat: Vec<[f64; 3]>,
    disc_cache: Option<crate::models::PointDiscCache>,
    code_grad: Vec<f64>,
    d_z: Vec<f64>,
    d_o: Vec<f64>,
}

/// One generator pass over a batch of occlusion series. Computes every
/// generator-side loss of the full objective, accumulates gradients into
/// E_p, D_c, and D_p (the critics and E_c are read-only here), and
/// returns the raw term values. Weights γ and β enter the gradients but
/// not the reported raw values.
pub fn generator_step(
    cfg: &TrainConfig,
    nets: &mut Networks,
    series: &[OcclusionSeries],
) -> CoreResult<GenOut> {
    if series.is_empty() {
        return Err(CoreError::InvalidArgument("generator_step needs a non-empty batch".into()));
    }
    nets.enc_p.zero_grad();
    nets.dec_c.zero_grad();
    nets.dec_p.zero_grad();

    let b = series.len() as f64;
    let fakes = 3.0 * b;
    let mut out = GenOut {
        rec: 0.0,
        z_equal: 0.0,
        npair: 0.0,
        g_point: 0.0,
        g_code: 0.0,
        o_mean: [0.0; 3],
    };

    for s in series {
        let members = [&s.base, &s.mid, &s.small];
        let mut passes: Vec<MemberPass> = Vec::with_capacity(3);

        // Forward: encode, decode both heads, score the completion.
        for (mi, m) in members.iter().enumerate() {
            let (code, enc_cache) = nets.enc_p.encode_cache(m)?;
            out.o_mean[mi] += code.o.iter().sum::<f64>() / (code.o.len() as f64 * b);
            let (c_hat, dc_cache) = nets.dec_c.decode_cache(&code.z)?;
            let fused = fuse(&code.z, &code.o, cfg.fusion_mode)?;
            let (p_hat, dp_cache) = nets.dec_p.decode_cache(&fused)?;
            let (rec_v, g_p_hat, g_c_hat) =
                reconstruction_loss_grad(m, &p_hat, &c_hat, cfg.k_degrade)?;
            out.rec += rec_v / b;

            let mut disc_cache = None;
            if cfg.enable_point_d {
                let (score, cache) = nets.disc_p.score_cache(&c_hat)?;
                out.g_point += wgan_g_loss(&[score])? / fakes;
                disc_cache = Some(cache);
            }
            let mut code_grad = Vec::new();
            if cfg.enable_code_d {
                let (score, cache) = nets.disc_c.score_cache(&code.z)?;
                out.g_code += wgan_g_loss(&[score])? / fakes;
                code_grad = nets.disc_c.input_gradient(&cache);
            }
            let d = code.z.len();
            passes.push(MemberPass {
                code,
                enc_cache,
                dc_cache,
                dp_cache,
                g_p_hat,
                g_c_hat,
                disc_cache,
                code_grad,
                d_z: vec![0.0; d],
                d_o: vec![0.0; d],
            });
        }

        // Shape codes must agree along the series.
        {
            let (v1, g1) = smooth_l1_grad(&passes[0].code.z, &passes[1].code.z)?;
            let (v2, g2) = smooth_l1_grad(&passes[0].code.z, &passes[2].code.z)?;
            out.z_equal += (v1 + v2) / b;
            let w = cfg.beta / b;
            for i in 0..g1.len() {
                passes[0].d_z[i] += w * (g1[i] + g2[i]);
                passes[1].d_z[i] -= w * g1[i];
                passes[2].d_z[i] -= w * g2[i];
            }
        }

        // Occlusion codes must rank by severity.
        match cfg.ranking {
            RankingMode::None => {}
            RankingMode::Npair | RankingMode::Triplet => {
                let g = if cfg.ranking == RankingMode::Npair {
                    ranking_loss_grad(&passes[0].code.o, &passes[1].code.o, &passes[2].code.o)?
                } else {
                    triplet_rank_loss_grad(
                        &passes[0].code.o,
                        &passes[1].code.o,
                        &passes[2].code.o,
                        cfg.triplet_delta,
                    )?
                };
                out.npair += g.value / b;
                let w = 1.0 / b;
                for i in 0..g.d_o.len() {
                    passes[0].d_o[i] += w * g.d_o[i];
                    passes[1].d_o[i] += w * g.d_mid[i];
                    passes[2].d_o[i] += w * g.d_small[i];
                }
            }
        }

        // Swap: decode the base shape code under the mid occlusion code
        // and vice versa; each must reconstruct the other member.
        let mut swaps: Vec<(usize, usize, crate::nn::MlpCache, Vec<[f64; 3]>)> = Vec::new();
        if cfg.enable_swap {
            for (zi, oi, target) in [(0usize, 1usize, &s.mid), (1, 0, &s.base)] {
                let fused = fuse(&passes[zi].code.z, &passes[oi].code.o, cfg.fusion_mode)?;
                let (p_hat, cache) = nets.dec_p.decode_cache(&fused)?;
                let (v, g) = chamfer_with_grad(target, &p_hat);
                out.rec += v / b;
                swaps.push((zi, oi, cache, g));
            }
        }

        // Reverse. Reconstruction carries γ; adversarial terms −1/fakes.
        let w_rec = cfg.gamma / b;
        for p in passes.iter_mut() {
            let mut d_c_hat = Mat::from_points(&p.g_c_hat);
            for v in &mut d_c_hat.data {
                *v *= w_rec;
            }
            if let Some(cache) = &p.disc_cache {
                let gin = nets.disc_p.input_gradient(cache);
                for (dst, src) in d_c_hat.data.iter_mut().zip(&gin.data) {
                    *dst -= src / fakes;
                }
            }
            let dz_from_c = nets.dec_c.backward(&p.dc_cache, &d_c_hat.to_points());
            for (dst, src) in p.d_z.iter_mut().zip(&dz_from_c) {
                *dst += src;
            }

            let mut d_p_hat = p.g_p_hat.clone();
            for g in &mut d_p_hat {
                for a in 0..3 {
                    g[a] *= w_rec;
                }
            }
            let dfused = nets.dec_p.backward(&p.dp_cache, &d_p_hat);
            let (dz_f, do_f) = fuse_backward(&p.code.z, &p.code.o, cfg.fusion_mode, &dfused);
            for i in 0..p.d_z.len() {
                p.d_z[i] += dz_f[i];
                p.d_o[i] += do_f[i];
            }

            if !p.code_grad.is_empty() {
                for (dst, src) in p.d_z.iter_mut().zip(&p.code_grad) {
                    *dst -= src / fakes;
                }
            }
        }

        for (zi, oi, cache, g) in swaps {
            let mut d_p_hat = g;
            for gp in &mut d_p_hat {
                for a in 0..3 {
                    gp[a] *= w_rec;
                }
            }
            let dfused = nets.dec_p.backward(&cache, &d_p_hat);
            let (dz_f, do_f) = fuse_backward(
                &passes[zi].code.z,
                &passes[oi].code.o,
                cfg.fusion_mode,
                &dfused,
            );
            for i in 0..dz_f.len() {
                passes[zi].d_z[i] += dz_f[i];
                passes[oi].d_o[i] += do_f[i];
            }
        }

        for p in &passes {
            nets.enc_p.backward(&p.enc_cache, &p.d_z, &p.d_o);
        }
    }

    for (name, v) in [
        ("rec", out.rec),
        ("z_equal", out.z_equal),
        ("npair", out.npair),
        ("g_point", out.g_point),
        ("g_code", out.g_code),
    ] {
        if !v.is_finite() {
            let _ = name;
            return Err(CoreError::NonFinite("generator step term"));
        }
    }
    Ok(out)
}

/// One critic pass. Completions from every series member are the fakes;
/// `reals` supplies genuine complete clouds (already at the completion
/// point count) whose E_c codes are the real samples for the code critic.
/// Gradients accumulate into the two critics only; the generator and E_c
/// are treated as fixed samplers. `rng` drives the interpolation
/// coefficients when `gp_mode` is `interpolate`.
pub fn discriminator_step(
    cfg: &TrainConfig,
    nets: &mut Networks,
    series: &[OcclusionSeries],
    reals: &[PointCloud],
    rng: &mut ChaCha8Rng,
) -> CoreResult<DiscOut> {
    if series.is_empty() || reals.is_empty() {
        return Err(CoreError::InvalidArgument(
            "discriminator_step needs non-empty fake and real batches".into(),
        ));
    }
    if !cfg.enable_point_d && !cfg.enable_code_d {
        return Ok(DiscOut { d_point: 0.0, d_code: 0.0 });
    }
    nets.disc_p.zero_grad();
    nets.disc_c.zero_grad();

    // Sample fakes with the current generator, detached.
    let mut fake_codes = Vec::with_capacity(series.len() * 3);
    let mut fake_clouds = Vec::with_capacity(series.len() * 3);
    for s in series {
        for m in [&s.base, &s.mid, &s.small] {
            let code = nets.enc_p.encode(m)?;
            fake_clouds.push(nets.dec_c.decode(&code.z)?);
            fake_codes.push(code.z);
        }
    }
    let n_fake = fake_clouds.len();

    let d_point = if cfg.enable_point_d {
        for y in reals {
            if y.len() != cfg.n_points_out {
                return Err(CoreError::DimensionMismatch {
                    expected: cfg.n_points_out,
                    got: y.len(),
                });
            }
        }
        let mut fake_scores = Vec::with_capacity(n_fake);
        let mut fake_caches = Vec::with_capacity(n_fake);
        for c in &fake_clouds {
            let (score, cache) = nets.disc_p.score_cache(c)?;
            fake_scores.push(score);
            fake_caches.push(cache);
        }
        let mut real_scores = Vec::with_capacity(reals.len());
        for y in reals {
            let (score, cache) = nets.disc_p.score_cache(y)?;
            real_scores.push(score);
            nets.disc_p.backward(&cache, -1.0 / reals.len() as f64);
        }
        for cache in &fake_caches {
            nets.disc_p.backward(cache, 1.0 / n_fake as f64);
        }
        // Gradient penalty evaluation points per mode.
        let mut norms = Vec::with_capacity(n_fake);
        for (fi, c) in fake_clouds.iter().enumerate() {
            let (cache, _interp);
            let eval_cache = match cfg.gp_mode {
                GpMode::Fake => &fake_caches[fi],
                GpMode::Interpolate => {
                    let y = &reals[fi % reals.len()];
                    let eps: f64 = rng.gen();
                    let pts: Vec<[f64; 3]> = y
                        .points()
                        .iter()
                        .zip(c.points())
                        .map(|(yp, cp)| {
                            [
                                eps * yp[0] + (1.0 - eps) * cp[0],
                                eps * yp[1] + (1.0 - eps) * cp[1],
                                eps * yp[2] + (1.0 - eps) * cp[2],
                            ]
                        })
                        .collect();
                    _interp = PointCloud::new(pts)?;
                    let (_, c2) = nets.disc_p.score_cache(&_interp)?;
                    cache = c2;
                    &cache
                }
            };
            let g = nets.disc_p.input_gradient(eval_cache);
            let norm = penalty_grad_norm(&g.data);
            norms.push(norm);
            let coeff = penalty_coefficient(norm, cfg.lambda_gp) / n_fake as f64;
            if coeff != 0.0 {
                let (tangent, _jvp) = nets.disc_p.tangent(eval_cache, &g);
                nets.disc_p.backward_tangent(eval_cache, &tangent, coeff);
            }
        }
        wgan_d_loss(&fake_scores, &real_scores, &norms, cfg.lambda_gp)?
    } else {
        0.0
    };

    let d_code = if cfg.enable_code_d {
        let mut real_codes = Vec::with_capacity(reals.len());
        for y in reals {
            real_codes.push(nets.enc_c.encode(y)?);
        }
        let mut fake_scores = Vec::with_capacity(n_fake);
        let mut fake_caches = Vec::with_capacity(n_fake);
        for z in &fake_codes {
            let (score, cache) = nets.disc_c.score_cache(z)?;
            fake_scores.push(score);
            fake_caches.push(cache);
        }
        let mut real_scores = Vec::with_capacity(real_codes.len());
        for z in &real_codes {
            let (score, cache) = nets.disc_c.score_cache(z)?;
            real_scores.push(score);
            nets.disc_c.backward(&cache, -1.0 / real_codes.len() as f64);
        }
        for cache in &fake_caches {
            nets.disc_c.backward(cache, 1.0 / n_fake as f64);
        }
        let mut norms = Vec::with_capacity(n_fake);
        for (fi, z) in fake_codes.iter().enumerate() {
            let (cache, _interp);
            let eval_cache = match cfg.gp_mode {
                GpMode::Fake => &fake_caches[fi],
                GpMode::Interpolate => {
                    let zr = &real_codes[fi % real_codes.len()];
                    let eps: f64 = rng.gen();
                    let mix: Vec<f64> = zr
                        .iter()
                        .zip(z)
                        .map(|(r, f)| eps * r + (1.0 - eps) * f)
                        .collect();
                    _interp = mix;
                    let (_, c2) = nets.disc_c.score_cache(&_interp)?;
                    cache = c2;
                    &cache
                }
            };
            let g = nets.disc_c.input_gradient(eval_cache);
            let norm = penalty_grad_norm(&g);
            norms.push(norm);
            let coeff = penalty_coefficient(norm, cfg.lambda_gp) / n_fake as f64;
            if coeff != 0.0 {
                let (tangent, _jvp) = nets.disc_c.tangent(eval_cache, &g);
                nets.disc_c.backward_tangent(eval_cache, &tangent, coeff);
            }
        }
        wgan_d_loss(&fake_scores, &real_scores, &norms, cfg.lambda_gp)?
    } else {
        0.0
    };

    if !(d_point.is_finite() && d_code.is_finite()) {
        return Err(CoreError::NonFinite("discriminator step term"));
    }
    Ok(DiscOut { d_point, d_code })
}
