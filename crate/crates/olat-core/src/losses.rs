//! Training objectives, each as a value function paired with an exact
//! analytic gradient.
//!
//! Gradients treat nearest-neighbor matchings, top-k selections, and
//! activation masks as locally constant — they are, almost everywhere —
//! so every function here passes a central finite-difference check away
//! from the measure-zero tie sets.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};
use crate::geometry::{degrade_indices, PointCloud};
use crate::math::{exp, log1p_sum_exp, sqrt};
use crate::metrics::chamfer_match;

/// Every loss term of one training step, with the composed totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// Reconstruction term (Chamfer on the partial reconstruction and
    /// the degraded completion, plus the swap terms when enabled).
    pub rec: f64,
    /// Shape-code equality term across the occlusion series.
    pub z_equal: f64,
    /// Ranking term over the occlusion codes.
    pub npair: f64,
    /// Generator term against the point critic.
    pub g_point: f64,
    /// Generator term against the code critic.
    pub g_code: f64,
    /// Point critic's own objective.
    pub d_point: f64,
    /// Code critic's own objective.
    pub d_code: f64,
    /// γ·rec + β·z_equal + npair + g_point + g_code.
    pub total_g: f64,
    /// d_point + d_code.
    pub total_d: f64,
}

impl LossBreakdown {
    /// All-zero breakdown.
    pub fn zero() -> Self {
        Self {
            rec: 0.0,
            z_equal: 0.0,
            npair: 0.0,
            g_point: 0.0,
            g_code: 0.0,
            d_point: 0.0,
            d_code: 0.0,
            total_g: 0.0,
            total_d: 0.0,
        }
    }
}

/// Composes the per-term losses into a [`LossBreakdown`] with totals.
/// Any non-finite component is rejected, naming the offending term.
#[allow(clippy::too_many_arguments)]
pub fn total_losses(
    rec: f64,
    z_equal: f64,
    npair: f64,
    g_point: f64,
    g_code: f64,
    d_point: f64,
    d_code: f64,
    gamma: f64,
    beta: f64,
) -> CoreResult<LossBreakdown> {
    for (name, v) in [
        ("rec", rec),
        ("z_equal", z_equal),
        ("npair", npair),
        ("g_point", g_point),
        ("g_code", g_code),
        ("d_point", d_point),
        ("d_code", d_code),
    ] {
        if !v.is_finite() {
            return Err(CoreError::NonFinite(name));
        }
    }
    let total_g = gamma * rec + beta * z_equal + npair + g_point + g_code;
    let total_d = d_point + d_code;
    if !total_g.is_finite() || !total_d.is_finite() {
        return Err(CoreError::NonFinite("total"));
    }
    Ok(LossBreakdown {
        rec,
        z_equal,
        npair,
        g_point,
        g_code,
        d_point,
        d_code,
        total_g,
        total_d,
    })
}

/// Chamfer distance from `target` (held fixed) to `pred`, with the
/// gradient on every `pred` coordinate.
pub fn chamfer_with_grad(target: &PointCloud, pred: &PointCloud) -> (f64, Vec<[f64; 3]>) {
    let m = chamfer_match(target, pred);
    let nt = target.len() as f64;
    let np = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![[0.0; 3]; pred.len()];
    // Forward term: each target point pulls its nearest prediction.
    for (t, &(j, d)) in target.points().iter().zip(&m.a_to_b) {
        value += d / nt;
        let p = pred.points()[j];
        for a in 0..3 {
            grad[j][a] += 2.0 * (p[a] - t[a]) / nt;
        }
    }
    // Backward term: each prediction is pulled toward its nearest target.
    for (j, (p, &(i, d))) in pred.points().iter().zip(&m.b_to_a).enumerate() {
        value += d / np;
        let t = target.points()[i];
        for a in 0..3 {
            grad[j][a] += 2.0 * (p[a] - t[a]) / np;
        }
    }
    (value, grad)
}

/// Point-wise reconstruction loss:
/// chamfer(P, P̂) + chamfer(P, degrade(Ĉ, P, k)).
pub fn reconstruction_loss(
    p: &PointCloud,
    p_hat: &PointCloud,
    c_hat: &PointCloud,
    k_degrade: usize,
) -> CoreResult<f64> {
    reconstruction_loss_grad(p, p_hat, c_hat, k_degrade).map(|(v, _, _)| v)
}

/// [`reconstruction_loss`] with gradients on P̂ and Ĉ coordinates.
/// The degradation selects a subset of Ĉ, so the completion's gradient
/// is the degraded cloud's gradient scattered to the selected points.
pub fn reconstruction_loss_grad(
    p: &PointCloud,
    p_hat: &PointCloud,
    c_hat: &PointCloud,
    k_degrade: usize,
) -> CoreResult<(f64, Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    let (v1, g_p_hat) = chamfer_with_grad(p, p_hat);
    let idx = degrade_indices(c_hat, p, k_degrade)?;
    let degraded = c_hat.select(&idx);
    let (v2, g_deg) = chamfer_with_grad(p, &degraded);
    let mut g_c_hat = vec![[0.0; 3]; c_hat.len()];
    for (&src, g) in idx.iter().zip(&g_deg) {
        g_c_hat[src] = *g;
    }
    Ok((v1 + v2, g_p_hat, g_c_hat))
}

/// Smooth-L1 (Huber) distance between two code vectors, mean-reduced:
/// h(x) = x²/2 for |x| < 1 and |x| − ½ otherwise, averaged over entries.
pub fn smooth_l1(a: &[f64], b: &[f64]) -> CoreResult<f64> {
    smooth_l1_grad(a, b).map(|(v, _)| v)
}

/// [`smooth_l1`] with the gradient on `a` (the gradient on `b` is its
/// negation).
pub fn smooth_l1_grad(a: &[f64], b: &[f64]) -> CoreResult<(f64, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(CoreError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.is_empty() {
        return Err(CoreError::InvalidArgument(alloc::string::String::from(
            "smooth_l1 of empty vectors",
        )));
    }
    let n = a.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        if d.abs() < 1.0 {
            value += 0.5 * d * d;
            grad.push(d / n);
        } else {
            value += d.abs() - 0.5;
            grad.push(if d > 0.0 { 1.0 / n } else { -1.0 / n });
        }
    }
    Ok((value / n, grad))
}

/// N-pair loss: log(1 + Σ_j exp(aᵀn_j − aᵀp)), computed in a shifted
/// form that cannot overflow. Strictly positive.
pub fn npair_loss(anchor: &[f64], positive: &[f64], negatives: &[&[f64]]) -> CoreResult<f64> {
    npair_grad(anchor, positive, negatives).map(|g| g.value)
}

/// Value and gradients of the N-pair loss.
pub struct NpairGrad {
    /// Loss value.
    pub value: f64,
    /// Gradient on the anchor.
    pub d_anchor: Vec<f64>,
    /// Gradient on the positive.
    pub d_positive: Vec<f64>,
    /// Gradients on each negative, in input order.
    pub d_negatives: Vec<Vec<f64>>,
}

/// [`npair_loss`] with gradients on every argument.
pub fn npair_grad(anchor: &[f64], positive: &[f64], negatives: &[&[f64]]) -> CoreResult<NpairGrad> {
    if negatives.is_empty() {
        return Err(CoreError::InvalidArgument(alloc::string::String::from(
            "npair loss needs at least one negative",
        )));
    }
    let d = anchor.len();
    if positive.len() != d {
        return Err(CoreError::DimensionMismatch { expected: d, got: positive.len() });
    }
    for n in negatives {
        if n.len() != d {
            return Err(CoreError::DimensionMismatch { expected: d, got: n.len() });
        }
    }
    let ap: f64 = anchor.iter().zip(positive).map(|(a, p)| a * p).sum();
    let exponents: Vec<f64> = negatives
        .iter()
        .map(|n| anchor.iter().zip(n.iter()).map(|(a, x)| a * x).sum::<f64>() - ap)
        .collect();
    let value = log1p_sum_exp(&exponents);

    // Softmax-style weights w_j = e^{x_j} / (1 + Σ e^{x_k}), shifted by
    // m = max(0, max x_j) so the largest exponent is 0.
    let m = exponents.iter().fold(0.0f64, |acc, &x| if x > acc { x } else { acc });
    let denom = exp(-m) + exponents.iter().map(|&x| exp(x - m)).sum::<f64>();
    let weights: Vec<f64> = exponents.iter().map(|&x| exp(x - m) / denom).collect();
    let w_sum: f64 = weights.iter().sum();

    let mut d_anchor = vec![0.0; d];
    for (w, n) in weights.iter().zip(negatives) {
        for (da, (&nv, &pv)) in d_anchor.iter_mut().zip(n.iter().zip(positive)) {
            *da += w * (nv - pv);
        }
    }
    let d_positive: Vec<f64> = anchor.iter().map(|&a| -w_sum * a).collect();
    let d_negatives: Vec<Vec<f64>> = weights
        .iter()
        .map(|&w| anchor.iter().map(|&a| w * a).collect())
        .collect();
    Ok(NpairGrad { value, d_anchor, d_positive, d_negatives })
}

/// Value and gradients of a ranking loss over an occlusion-code triple.
pub struct RankingGrad {
    /// Loss value.
    pub value: f64,
    /// Gradient on o (least occluded).
    pub d_o: Vec<f64>,
    /// Gradient on o′.
    pub d_mid: Vec<f64>,
    /// Gradient on o″ (most occluded).
    pub d_small: Vec<f64>,
}

/// N-pair ranking over the three anchor sets
/// (𝟙, o, {o′, o″}), (o, o′, {o″}), (o″, o′, {o}): the ordering
/// o″ ≤ o′ ≤ o ≤ 𝟙 expressed through inner products.
pub fn ranking_loss(o: &[f64], o_mid: &[f64], o_small: &[f64]) -> CoreResult<f64> {
    ranking_loss_grad(o, o_mid, o_small).map(|g| g.value)
}

/// [`ranking_loss`] with gradients on all three codes.
pub fn ranking_loss_grad(o: &[f64], o_mid: &[f64], o_small: &[f64]) -> CoreResult<RankingGrad> {
    let ones = vec![1.0; o.len()];
    let t1 = npair_grad(&ones, o, &[o_mid, o_small])?;
    let t2 = npair_grad(o, o_mid, &[o_small])?;
    let t3 = npair_grad(o_small, o_mid, &[o])?;

    let mut d_o = t1.d_positive;
    let mut d_mid = t1.d_negatives[0].clone();
    let mut d_small = t1.d_negatives[1].clone();
    for i in 0..o.len() {
        d_o[i] += t2.d_anchor[i] + t3.d_negatives[0][i];
        d_mid[i] += t2.d_positive[i] + t3.d_positive[i];
        d_small[i] += t2.d_negatives[0][i] + t3.d_anchor[i];
    }
    Ok(RankingGrad { value: t1.value + t2.value + t3.value, d_o, d_mid, d_small })
}

/// Triplet-margin ranking over the same three anchor sets, the ablation
/// alternative to [`ranking_loss`]: per set,
/// mean_j max(0, ‖a−p‖² − ‖a−n_j‖² + δ).
pub fn triplet_rank_loss(
    o: &[f64],
    o_mid: &[f64],
    o_small: &[f64],
    delta: f64,
) -> CoreResult<f64> {
    triplet_rank_loss_grad(o, o_mid, o_small, delta).map(|g| g.value)
}

/// [`triplet_rank_loss`] with (sub)gradients on all three codes.
pub fn triplet_rank_loss_grad(
    o: &[f64],
    o_mid: &[f64],
    o_small: &[f64],
    delta: f64,
) -> CoreResult<RankingGrad> {
    if !(delta > 0.0) {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "triplet margin must be positive, got {delta}"
        )));
    }
    let d = o.len();
    if o_mid.len() != d || o_small.len() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: if o_mid.len() != d { o_mid.len() } else { o_small.len() },
        });
    }
    let ones = vec![1.0; d];
    let mut value = 0.0;
    let mut d_o = vec![0.0; d];
    let mut d_mid = vec![0.0; d];
    let mut d_small = vec![0.0; d];

    // One hinge term; scale is 1/N for the set's negative count. The
    // slot arguments say where each gradient lands.
    let mut term = |a: &[f64],
                    p: &[f64],
                    n: &[f64],
                    g_a: Option<&mut Vec<f64>>,
                    g_p: &mut Vec<f64>,
                    g_n: &mut Vec<f64>,
                    scale: f64| {
        let dist_ap: f64 = a.iter().zip(p).map(|(x, y)| (x - y) * (x - y)).sum();
        let dist_an: f64 = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum();
        let h = dist_ap - dist_an + delta;
        if h > 0.0 {
            value += scale * h;
            for i in 0..d {
                g_p[i] += scale * 2.0 * (p[i] - a[i]);
                g_n[i] += scale * 2.0 * (a[i] - n[i]);
            }
            if let Some(g_a) = g_a {
                for i in 0..d {
                    g_a[i] += scale * 2.0 * ((n[i] - a[i]) - (p[i] - a[i]));
                }
            }
        }
    };

    // Set 1: a = 𝟙 (constant), p = o, n ∈ {o′, o″}, averaged.
    term(&ones, o, o_mid, None, &mut d_o, &mut d_mid, 0.5);
    term(&ones, o, o_small, None, &mut d_o, &mut d_small, 0.5);
    // Set 2: a = o, p = o′, n = o″.
    term(o, o_mid, o_small, Some(&mut d_o), &mut d_mid, &mut d_small, 1.0);
    // Set 3: a = o″, p = o′, n = o.
    term(o_small, o_mid, o, Some(&mut d_small), &mut d_mid, &mut d_o, 1.0);

    Ok(RankingGrad { value, d_o, d_mid, d_small })
}

/// Critic objective: mean(D(fake)) − mean(D(real)) + λ_gp·mean((‖g‖−1)²).
/// Minimizing it trains the critic. `grad_norms` are the input-gradient
/// norms at the penalty's evaluation points.
pub fn wgan_d_loss(
    d_fake: &[f64],
    d_real: &[f64],
    grad_norms: &[f64],
    lambda_gp: f64,
) -> CoreResult<f64> {
    if lambda_gp < 0.0 {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "lambda_gp must be non-negative, got {lambda_gp}"
        )));
    }
    if d_fake.is_empty() || d_real.is_empty() {
        return Err(CoreError::InvalidArgument(alloc::string::String::from(
            "wgan_d_loss needs non-empty score batches",
        )));
    }
    let fake = d_fake.iter().sum::<f64>() / d_fake.len() as f64;
    let real = d_real.iter().sum::<f64>() / d_real.len() as f64;
    let gp = if grad_norms.is_empty() {
        0.0
    } else {
        grad_norms.iter().map(|&n| (n - 1.0) * (n - 1.0)).sum::<f64>() / grad_norms.len() as f64
    };
    Ok(fake - real + lambda_gp * gp)
}

/// Generator objective against a critic: −mean(D(fake)).
pub fn wgan_g_loss(d_fake: &[f64]) -> CoreResult<f64> {
    if d_fake.is_empty() {
        return Err(CoreError::InvalidArgument(alloc::string::String::from(
            "wgan_g_loss needs a non-empty score batch",
        )));
    }
    Ok(-d_fake.iter().sum::<f64>() / d_fake.len() as f64)
}

/// Tiny bias inside gradient-norm computation so the penalty stays
/// differentiable when a gradient vanishes exactly.
pub const GRAD_NORM_EPS: f64 = 1e-12;

/// Euclidean norm of a flat gradient, regularized by [`GRAD_NORM_EPS`].
pub fn penalty_grad_norm(g: &[f64]) -> f64 {
    sqrt(g.iter().map(|v| v * v).sum::<f64>() + GRAD_NORM_EPS)
}

/// Coefficient c such that ∇_θ of one sample's penalty term equals
/// c · ∇_θ (gᵀ ∇_x D): c = 2λ_gp(‖g‖−1)/‖g‖, before batch reduction.
pub fn penalty_coefficient(norm: f64, lambda_gp: f64) -> f64 {
    2.0 * lambda_gp * (norm - 1.0) / norm
}
