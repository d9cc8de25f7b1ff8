//! Point-cloud value types and the geometric kernels the rest of the
//! pipeline consumes: exact k-nearest-neighbor search, normalization,
//! occlusion-series generation, the degradation operator, and resampling.
//!
//! All searches are exact brute-force scans; at the cloud sizes this
//! project targets that is faster than building an index and keeps every
//! result bit-reproducible. Ties are broken by lower reference index.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, CoreResult};
use crate::math::dist_sq;
use crate::rng;

/// An ordered set of 3-D points in model coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<[f64; 3]>) -> CoreResult<Self> {
        if points.is_empty() {
            return Err(CoreError::InvalidArgument("point cloud is empty".to_string()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite() && p[2].is_finite()) {
                return Err(CoreError::InvalidArgument(alloc::format!(
                    "non-finite coordinate at point {i}"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: empty clouds cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The points, in order.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Consumes the cloud and returns its point buffer.
    pub fn into_points(self) -> Vec<[f64; 3]> {
        self.points
    }

    /// Centroid of the cloud.
    pub fn centroid(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for p in &self.points {
            c[0] += p[0];
            c[1] += p[1];
            c[2] += p[2];
        }
        let n = self.points.len() as f64;
        [c[0] / n, c[1] / n, c[2] / n]
    }

    /// New cloud holding the points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        Self { points }
    }

    /// New cloud without the points whose indices appear in `drop`
    /// (`drop` must be sorted ascending); original order is kept.
    pub fn without_sorted(&self, drop: &[usize]) -> Self {
        let mut points = Vec::with_capacity(self.points.len() - drop.len());
        let mut d = 0;
        for (i, p) in self.points.iter().enumerate() {
            if d < drop.len() && drop[d] == i {
                d += 1;
            } else {
                points.push(*p);
            }
        }
        Self { points }
    }
}

/// One neighbor found by [`knn`]: reference index and squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index into the reference cloud.
    pub index: usize,
    /// Squared Euclidean distance to the query point.
    pub dist_sq: f64,
}

/// Exact k-nearest neighbors of every query point within `reference`.
///
/// Results per query are ascending by squared distance, ties broken by
/// lower reference index.
pub fn knn(query: &PointCloud, reference: &PointCloud, k: usize) -> CoreResult<Vec<Vec<Neighbor>>> {
    if k == 0 || k > reference.len() {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "k = {k} outside 1..={}",
            reference.len()
        )));
    }
    let mut out = Vec::with_capacity(query.len());
    let mut heap: Vec<Neighbor> = Vec::with_capacity(k);
    for q in query.points() {
        heap.clear();
        knn_point(*q, reference.points(), k, &mut heap);
        out.push(heap.clone());
    }
    Ok(out)
}

/// Top-k scan for one query point; `out` receives the sorted result.
fn knn_point(q: [f64; 3], reference: &[[f64; 3]], k: usize, out: &mut Vec<Neighbor>) {
    for (i, r) in reference.iter().enumerate() {
        let d = dist_sq(q, *r);
        if out.len() < k {
            let pos = out.partition_point(|n| (n.dist_sq, n.index) <= (d, i));
            out.insert(pos, Neighbor { index: i, dist_sq: d });
        } else if (d, i) < (out[k - 1].dist_sq, out[k - 1].index) {
            let pos = out.partition_point(|n| (n.dist_sq, n.index) <= (d, i));
            out.insert(pos, Neighbor { index: i, dist_sq: d });
            out.pop();
        }
    }
}

/// Index and squared distance of the nearest reference point (lowest
/// index wins ties). Hot path for the Chamfer kernels.
pub fn nearest_one(q: [f64; 3], reference: &[[f64; 3]]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, r) in reference.iter().enumerate() {
        let d = dist_sq(q, *r);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// Centers a cloud on the origin and scales its largest absolute
/// coordinate to 1. Returns the normalized cloud with the `(centroid,
/// scale)` pair that inverts the transform.
pub fn normalize(cloud: &PointCloud) -> CoreResult<(PointCloud, [f64; 3], f64)> {
    let c = cloud.centroid();
    let mut scale = 0.0f64;
    for p in cloud.points() {
        for a in 0..3 {
            let v = (p[a] - c[a]).abs();
            if v > scale {
                scale = v;
            }
        }
    }
    if scale == 0.0 {
        return Err(CoreError::DegenerateInput(
            "all points identical; normalization scale would be zero".to_string(),
        ));
    }
    let points = cloud
        .points()
        .iter()
        .map(|p| {
            [
                (p[0] - c[0]) / scale,
                (p[1] - c[1]) / scale,
                (p[2] - c[2]) / scale,
            ]
        })
        .collect();
    Ok((PointCloud { points }, c, scale))
}

/// Inverts [`normalize`]: `p * scale + centroid` for every point.
pub fn denormalize(cloud: &PointCloud, centroid: [f64; 3], scale: f64) -> PointCloud {
    let points = cloud
        .points()
        .iter()
        .map(|p| {
            [
                p[0] * scale + centroid[0],
                p[1] * scale + centroid[1],
                p[2] * scale + centroid[2],
            ]
        })
        .collect();
    PointCloud { points }
}

/// A triplet of nested partial clouds: `base` ⊃ `mid` ⊃ `small`, with K
/// and 2K points removed around a seed point.
#[derive(Debug, Clone)]
pub struct OcclusionSeries {
    /// The original partial cloud P.
    pub base: PointCloud,
    /// P′: base minus the K points nearest the seed.
    pub mid: PointCloud,
    /// P″: base minus the 2K points nearest the seed.
    pub small: PointCloud,
    /// Number of points removed at the first level.
    pub removal_count: usize,
    /// Index into `base` of the occluder seed point.
    pub seed_point_index: usize,
}

/// Builds an occlusion series by removing the K (then 2K) nearest
/// neighbors of a seed point drawn uniformly from `base` under `rng_seed`.
pub fn make_occlusion_series(
    base: &PointCloud,
    k_removal: usize,
    rng_seed: u64,
) -> CoreResult<OcclusionSeries> {
    let mut rng = rng::stream(rng_seed, rng::TAG_SERIES, 0);
    let seed_index = rng.gen_range(0..base.len());
    make_occlusion_series_at(base, k_removal, seed_index)
}

/// Same as [`make_occlusion_series`] but with the seed point fixed.
pub fn make_occlusion_series_at(
    base: &PointCloud,
    k_removal: usize,
    seed_point_index: usize,
) -> CoreResult<OcclusionSeries> {
    if k_removal == 0 {
        return Err(CoreError::InvalidArgument("removal count K must be positive".to_string()));
    }
    if base.len() <= 2 * k_removal {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "cloud of {} points cannot lose 2K = {} points",
            base.len(),
            2 * k_removal
        )));
    }
    if seed_point_index >= base.len() {
        return Err(CoreError::InvalidArgument("seed point index out of range".to_string()));
    }
    let seed = base.points()[seed_point_index];
    let mut nearest = Vec::with_capacity(2 * k_removal);
    knn_point(seed, base.points(), 2 * k_removal, &mut nearest);

    let mut drop_k: Vec<usize> = nearest[..k_removal].iter().map(|n| n.index).collect();
    let mut drop_2k: Vec<usize> = nearest.iter().map(|n| n.index).collect();
    drop_k.sort_unstable();
    drop_2k.sort_unstable();

    Ok(OcclusionSeries {
        base: base.clone(),
        mid: base.without_sorted(&drop_k),
        small: base.without_sorted(&drop_2k),
        removal_count: k_removal,
        seed_point_index,
    })
}

/// Indices into `predicted` selected by the degradation operator: the
/// union, over every partial point, of its k nearest predicted points.
/// Sorted ascending and deduplicated.
pub fn degrade_indices(
    predicted: &PointCloud,
    partial: &PointCloud,
    k: usize,
) -> CoreResult<Vec<usize>> {
    let neighbors = knn(partial, predicted, k)?;
    let mut selected: Vec<usize> = neighbors
        .iter()
        .flat_map(|ns| ns.iter().map(|n| n.index))
        .collect();
    selected.sort_unstable();
    selected.dedup();
    Ok(selected)
}

/// Degrades a predicted complete cloud back to a partial-like subset by
/// keeping, per partial point, its k nearest predicted points.
///
/// The output is a subset of `predicted`; selected points keep their
/// identity, so coordinate gradients pass straight through the selection.
pub fn degrade(predicted: &PointCloud, partial: &PointCloud, k: usize) -> CoreResult<PointCloud> {
    let idx = degrade_indices(predicted, partial, k)?;
    Ok(predicted.select(&idx))
}

/// Resamples a cloud to exactly `m` points: a uniform subsample without
/// replacement when the cloud is large enough, otherwise the original
/// points padded by draws with replacement. `m == len` returns a copy.
pub fn resample(cloud: &PointCloud, m: usize, rng_seed: u64) -> CoreResult<PointCloud> {
    if m == 0 {
        return Err(CoreError::InvalidArgument("resample size must be positive".to_string()));
    }
    let n = cloud.len();
    let mut rng = rng::stream(rng_seed, rng::TAG_RESAMPLE, 0);
    if m == n {
        return Ok(cloud.clone());
    }
    if m < n {
        // Partial Fisher-Yates over the index vector; first m slots win.
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        idx.truncate(m);
        return Ok(cloud.select(&idx));
    }
    let mut points = cloud.points().to_vec();
    points.reserve(m - n);
    for _ in n..m {
        let j = rng.gen_range(0..n);
        points.push(cloud.points()[j]);
    }
    Ok(PointCloud { points })
}
