//! Evaluation metrics over point clouds: Chamfer distance, unidirectional
//! Chamfer distance, F1 score, and minimum-matching distance.
//!
//! Chamfer terms use *squared* Euclidean distances averaged per side; the
//! F1 score thresholds *unsquared* distances. Both conventions are the
//! ones used throughout the completion literature, and the tests pin them
//! against brute-force oracles.

use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};
use crate::geometry::{nearest_one, PointCloud};
use crate::math::sqrt;

/// Mean over `from` of the squared distance to the nearest point of `to`.
fn mean_nearest_sq(from: &PointCloud, to: &PointCloud) -> f64 {
    let to_pts = to.points();
    let mut acc = 0.0;
    for q in from.points() {
        acc += nearest_one(*q, to_pts).1;
    }
    acc / from.len() as f64
}

/// Symmetric Chamfer distance:
/// mean_a min_b ‖a−b‖² + mean_b min_a ‖a−b‖².
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    mean_nearest_sq(a, b) + mean_nearest_sq(b, a)
}

/// Unidirectional Chamfer distance from `partial` into `complete`:
/// the forward term of [`chamfer`] alone. Measures how well the
/// completion covers the observed points without penalizing extra
/// structure in the unobserved region.
pub fn ucd(partial: &PointCloud, complete: &PointCloud) -> f64 {
    mean_nearest_sq(partial, complete)
}

/// F1 score at distance threshold `tau` (unsquared):
/// harmonic mean of accuracy (fraction of predicted points within `tau`
/// of ground truth) and completeness (the reverse). Zero when both are
/// zero.
pub fn f1_score(predicted: &PointCloud, truth: &PointCloud, tau: f64) -> CoreResult<f64> {
    if !(tau > 0.0) {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "f1 threshold must be positive, got {tau}"
        )));
    }
    let acc = fraction_within(predicted, truth, tau);
    let comp = fraction_within(truth, predicted, tau);
    if acc + comp == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * acc * comp / (acc + comp))
}

fn fraction_within(from: &PointCloud, to: &PointCloud, tau: f64) -> f64 {
    let to_pts = to.points();
    let mut hits = 0usize;
    for q in from.points() {
        if sqrt(nearest_one(*q, to_pts).1) <= tau {
            hits += 1;
        }
    }
    hits as f64 / from.len() as f64
}

/// Minimum matching distance: for each reference cloud, the smallest
/// Chamfer distance to any generated cloud, averaged over references.
/// Lower means the generated set covers the reference set well.
pub fn mmd(generated: &[PointCloud], references: &[PointCloud]) -> CoreResult<f64> {
    if generated.is_empty() || references.is_empty() {
        return Err(CoreError::InvalidArgument(
            alloc::string::String::from("mmd needs at least one cloud on each side"),
        ));
    }
    let mut acc = 0.0;
    for r in references {
        let mut best = f64::INFINITY;
        for g in generated {
            let d = chamfer(g, r);
            if d < best {
                best = d;
            }
        }
        acc += best;
    }
    Ok(acc / references.len() as f64)
}

/// Per-point squared nearest distances in both directions, plus the
/// nearest-neighbor index each point matched to. The loss layer uses
/// this to route Chamfer gradients.
pub struct ChamferMatch {
    /// For each point of `a`: (index into `b`, squared distance).
    pub a_to_b: Vec<(usize, f64)>,
    /// For each point of `b`: (index into `a`, squared distance).
    pub b_to_a: Vec<(usize, f64)>,
}

/// Computes the nearest-neighbor matching underlying [`chamfer`].
pub fn chamfer_match(a: &PointCloud, b: &PointCloud) -> ChamferMatch {
    let a_pts = a.points();
    let b_pts = b.points();
    ChamferMatch {
        a_to_b: a_pts.iter().map(|q| nearest_one(*q, b_pts)).collect(),
        b_to_a: b_pts.iter().map(|q| nearest_one(*q, a_pts)).collect(),
    }
}

/// Chamfer value recomputed from an existing match. Equals
/// [`chamfer`]`(a, b)` when the match came from the same pair.
pub fn chamfer_from_match(m: &ChamferMatch) -> f64 {
    let fwd: f64 = m.a_to_b.iter().map(|&(_, d)| d).sum::<f64>() / m.a_to_b.len() as f64;
    let bwd: f64 = m.b_to_a.iter().map(|&(_, d)| d).sum::<f64>() / m.b_to_a.len() as f64;
    fwd + bwd
}
