//! Parametric desk-object generators and synthetic occlusion.
//!
//! Shapes are unions of analytic surface primitives sampled uniformly by
//! area. Each shape is canonicalized analytically — bounding box centered
//! at the origin, largest half-extent exactly one — so canonical placement
//! holds regardless of how the sampling noise falls. The vertical axis
//! is z.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::PartialMode;
use crate::error::{CoreError, CoreResult};
use crate::geometry::PointCloud;
use crate::rng::{stream, TAG_PARTIAL, TAG_SHAPE};

use core::f64::consts::{PI, TAU};

/// Object family a generated shape belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Axis-aligned rectangular box (before pose rotation).
    Box,
    /// Closed circular cylinder, axis vertical.
    Cylinder,
    /// Sphere.
    Sphere,
    /// Lamp: base disc, thin pole, conical shade.
    LampLike,
    /// Chair: seat slab, four legs, back rest.
    ChairLike,
}

/// All categories, in canonical order.
pub const CATEGORIES: [Category; 5] = [
    Category::Box,
    Category::Cylinder,
    Category::Sphere,
    Category::LampLike,
    Category::ChairLike,
];

impl Category {
    /// Canonical lowercase name.
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Box => "box",
            Category::Cylinder => "cylinder",
            Category::Sphere => "sphere",
            Category::LampLike => "lamp_like",
            Category::ChairLike => "chair_like",
        }
    }

    /// Parses a canonical name.
    pub fn parse(s: &str) -> CoreResult<Self> {
        CATEGORIES
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CoreError::InvalidArgument(format!("unknown category `{s}`")))
    }

    /// Number of size parameters the category expects.
    pub fn dims_len(self) -> usize {
        match self {
            Category::Box => 3,
            Category::Cylinder => 2,
            Category::Sphere => 1,
            Category::LampLike => 6,
            Category::ChairLike => 7,
        }
    }
}

impl core::fmt::Display for Category {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full description of one shape instance.
///
/// `dims` meaning by category:
/// - box: half-extents `[hx, hy, hz]`
/// - cylinder: `[radius, half_height]`
/// - sphere: `[radius]` (normalized away; spheres are unit after canonicalization)
/// - lamp_like: `[base_r, pole_r, pole_h, shade_r_bottom, shade_r_top, shade_h]`
/// - chair_like: `[seat_w, seat_d, seat_t, leg_h, leg_t, back_h, back_t]`
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    /// Object family.
    pub category: Category,
    /// Category-specific positive size parameters (see type docs).
    pub dims: Vec<f64>,
    /// Rotation about the vertical axis, radians.
    pub pose: f64,
    /// Number of surface points to sample.
    pub sample_count: usize,
}

impl ShapeSpec {
    /// Checks parameter count, positivity, and finiteness.
    pub fn validate(&self) -> CoreResult<()> {
        let want = self.category.dims_len();
        if self.dims.len() != want {
            return Err(CoreError::DimensionMismatch { expected: want, got: self.dims.len() });
        }
        for &d in &self.dims {
            if !(d.is_finite() && d > 0.0) {
                return Err(CoreError::InvalidArgument(format!(
                    "{} size parameters must be positive and finite, got {d}",
                    self.category
                )));
            }
        }
        if !self.pose.is_finite() {
            return Err(CoreError::InvalidArgument(format!("non-finite pose {}", self.pose)));
        }
        if self.sample_count == 0 {
            return Err(CoreError::InvalidArgument("sample_count must be positive".into()));
        }
        Ok(())
    }

    /// Draws a random spec for `category` with sizes in sensible ranges
    /// and a uniform pose.
    pub fn random(category: Category, sample_count: usize, rng: &mut ChaCha8Rng) -> Self {
        let ranges: &[(f64, f64)] = match category {
            Category::Box => &[(0.3, 1.0), (0.3, 1.0), (0.3, 1.0)],
            Category::Cylinder => &[(0.2, 0.8), (0.3, 1.0)],
            Category::Sphere => &[(0.5, 1.0)],
            Category::LampLike => {
                &[(0.25, 0.45), (0.02, 0.05), (0.8, 1.4), (0.25, 0.45), (0.1, 0.25), (0.25, 0.45)]
            }
            Category::ChairLike => {
                &[(0.7, 1.1), (0.7, 1.1), (0.06, 0.12), (0.5, 0.9), (0.05, 0.1), (0.6, 1.0), (0.06, 0.12)]
            }
        };
        let dims = ranges.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
        let pose = rng.gen_range(0.0..TAU);
        Self { category, dims, pose, sample_count }
    }
}

/// One analytic surface patch. Cylinder, cone, disc, and sphere axes are
/// vertical, so a pose rotation moves only their centers; rectangles
/// rotate their edge vectors as well.
#[derive(Debug, Clone)]
enum Prim {
    /// `c + s*u + t*v` for `s, t` in `[-1, 1]`.
    Rect { c: [f64; 3], u: [f64; 3], v: [f64; 3] },
    /// Horizontal disc of radius `r` centered at `c`.
    Disc { c: [f64; 3], r: f64 },
    /// Cylinder side wall, half-height `hh`, centered at `c`.
    CylSide { c: [f64; 3], r: f64, hh: f64 },
    /// Frustum side from radius `r0` at `base` to `r1` at height `h` above.
    ConeSide { base: [f64; 3], r0: f64, r1: f64, h: f64 },
    /// Sphere surface.
    Sphere { c: [f64; 3], r: f64 },
}

fn rot_z(p: [f64; 3], cos: f64, sin: f64) -> [f64; 3] {
    [cos * p[0] - sin * p[1], sin * p[0] + cos * p[1], p[2]]
}

impl Prim {
    fn area(&self) -> f64 {
        match *self {
            Prim::Rect { u, v, .. } => {
                let cx = u[1] * v[2] - u[2] * v[1];
                let cy = u[2] * v[0] - u[0] * v[2];
                let cz = u[0] * v[1] - u[1] * v[0];
                4.0 * libm::sqrt(cx * cx + cy * cy + cz * cz)
            }
            Prim::Disc { r, .. } => PI * r * r,
            Prim::CylSide { r, hh, .. } => 4.0 * PI * r * hh,
            Prim::ConeSide { r0, r1, h, .. } => PI * (r0 + r1) * libm::hypot(r0 - r1, h),
            Prim::Sphere { r, .. } => 4.0 * PI * r * r,
        }
    }

    /// Axis-aligned bounding box as (center, half-extents).
    fn aabb(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Prim::Rect { c, u, v } => {
                let half = [
                    u[0].abs() + v[0].abs(),
                    u[1].abs() + v[1].abs(),
                    u[2].abs() + v[2].abs(),
                ];
                (c, half)
            }
            Prim::Disc { c, r } => (c, [r, r, 0.0]),
            Prim::CylSide { c, r, hh } => (c, [r, r, hh]),
            Prim::ConeSide { base, r0, r1, h } => {
                let r = r0.max(r1);
                ([base[0], base[1], base[2] + 0.5 * h], [r, r, 0.5 * h])
            }
            Prim::Sphere { c, r } => (c, [r, r, r]),
        }
    }

    fn rotate_z(&mut self, angle: f64) {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        match self {
            Prim::Rect { c: ctr, u, v } => {
                *ctr = rot_z(*ctr, c, s);
                *u = rot_z(*u, c, s);
                *v = rot_z(*v, c, s);
            }
            Prim::Disc { c: ctr, .. }
            | Prim::CylSide { c: ctr, .. }
            | Prim::Sphere { c: ctr, .. } => *ctr = rot_z(*ctr, c, s),
            Prim::ConeSide { base, .. } => *base = rot_z(*base, c, s),
        }
    }

    /// Maps `p -> (p - mid) * k`.
    fn canonicalize(&mut self, mid: [f64; 3], k: f64) {
        let shift = |p: &mut [f64; 3]| {
            for a in 0..3 {
                p[a] = (p[a] - mid[a]) * k;
            }
        };
        let scale3 = |p: &mut [f64; 3]| {
            for a in 0..3 {
                p[a] *= k;
            }
        };
        match self {
            Prim::Rect { c, u, v } => {
                shift(c);
                scale3(u);
                scale3(v);
            }
            Prim::Disc { c, r } => {
                shift(c);
                *r *= k;
            }
            Prim::CylSide { c, r, hh } => {
                shift(c);
                *r *= k;
                *hh *= k;
            }
            Prim::ConeSide { base, r0, r1, h } => {
                shift(base);
                *r0 *= k;
                *r1 *= k;
                *h *= k;
            }
            Prim::Sphere { c, r } => {
                shift(c);
                *r *= k;
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        match *self {
            Prim::Rect { c, u, v } => {
                let s = rng.gen_range(-1.0..=1.0);
                let t = rng.gen_range(-1.0..=1.0);
                [
                    c[0] + s * u[0] + t * v[0],
                    c[1] + s * u[1] + t * v[1],
                    c[2] + s * u[2] + t * v[2],
                ]
            }
            Prim::Disc { c, r } => {
                let rho = r * libm::sqrt(rng.gen::<f64>());
                let phi = rng.gen_range(0.0..TAU);
                [c[0] + rho * libm::cos(phi), c[1] + rho * libm::sin(phi), c[2]]
            }
            Prim::CylSide { c, r, hh } => {
                let phi = rng.gen_range(0.0..TAU);
                let z = rng.gen_range(-hh..=hh);
                [c[0] + r * libm::cos(phi), c[1] + r * libm::sin(phi), c[2] + z]
            }
            Prim::ConeSide { base, r0, r1, h } => {
                // Height fraction with density proportional to the local
                // radius r0 + (r1 - r0) t, inverted analytically.
                let w = rng.gen::<f64>() * 0.5 * (r0 + r1);
                let d = r1 - r0;
                let t = if d.abs() < 1e-12 {
                    w / r0
                } else {
                    (libm::sqrt(r0 * r0 + 2.0 * d * w) - r0) / d
                };
                let t = t.clamp(0.0, 1.0);
                let r = r0 + d * t;
                let phi = rng.gen_range(0.0..TAU);
                [base[0] + r * libm::cos(phi), base[1] + r * libm::sin(phi), base[2] + h * t]
            }
            Prim::Sphere { c, r } => {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let phi = rng.gen_range(0.0..TAU);
                let rxy = libm::sqrt((1.0 - z * z).max(0.0));
                [
                    c[0] + r * rxy * libm::cos(phi),
                    c[1] + r * rxy * libm::sin(phi),
                    c[2] + r * z,
                ]
            }
        }
    }
}

/// Six rectangles forming a box with half-extents `h` centered at `c`.
fn box_prims(c: [f64; 3], h: [f64; 3], out: &mut Vec<Prim>) {
    let [hx, hy, hz] = h;
    let faces = [
        ([hx, 0.0, 0.0], [0.0, hy, 0.0], [0.0, 0.0, hz]),
        ([-hx, 0.0, 0.0], [0.0, hy, 0.0], [0.0, 0.0, hz]),
        ([0.0, hy, 0.0], [hx, 0.0, 0.0], [0.0, 0.0, hz]),
        ([0.0, -hy, 0.0], [hx, 0.0, 0.0], [0.0, 0.0, hz]),
        ([0.0, 0.0, hz], [hx, 0.0, 0.0], [0.0, hy, 0.0]),
        ([0.0, 0.0, -hz], [hx, 0.0, 0.0], [0.0, hy, 0.0]),
    ];
    for (off, u, v) in faces {
        let ctr = [c[0] + off[0], c[1] + off[1], c[2] + off[2]];
        out.push(Prim::Rect { c: ctr, u, v });
    }
}

fn build_prims(spec: &ShapeSpec) -> Vec<Prim> {
    let d = &spec.dims;
    let mut prims = Vec::new();
    match spec.category {
        Category::Box => box_prims([0.0; 3], [d[0], d[1], d[2]], &mut prims),
        Category::Cylinder => {
            let (r, hh) = (d[0], d[1]);
            prims.push(Prim::CylSide { c: [0.0; 3], r, hh });
            prims.push(Prim::Disc { c: [0.0, 0.0, hh], r });
            prims.push(Prim::Disc { c: [0.0, 0.0, -hh], r });
        }
        Category::Sphere => prims.push(Prim::Sphere { c: [0.0; 3], r: d[0] }),
        Category::LampLike => {
            let (base_r, pole_r, pole_h) = (d[0], d[1], d[2]);
            let (shade_r0, shade_r1, shade_h) = (d[3], d[4], d[5]);
            prims.push(Prim::Disc { c: [0.0; 3], r: base_r });
            prims.push(Prim::CylSide { c: [0.0, 0.0, 0.5 * pole_h], r: pole_r, hh: 0.5 * pole_h });
            prims.push(Prim::ConeSide { base: [0.0, 0.0, pole_h], r0: shade_r0, r1: shade_r1, h: shade_h });
        }
        Category::ChairLike => {
            let (seat_w, seat_d, seat_t) = (d[0], d[1], d[2]);
            let (leg_h, leg_t) = (d[3], d[4]);
            let (back_h, back_t) = (d[5], d[6]);
            box_prims(
                [0.0, 0.0, leg_h + 0.5 * seat_t],
                [0.5 * seat_w, 0.5 * seat_d, 0.5 * seat_t],
                &mut prims,
            );
            let (lx, ly) = (0.5 * (seat_w - leg_t), 0.5 * (seat_d - leg_t));
            for sx in [-1.0, 1.0] {
                for sy in [-1.0, 1.0] {
                    box_prims(
                        [sx * lx, sy * ly, 0.5 * leg_h],
                        [0.5 * leg_t, 0.5 * leg_t, 0.5 * leg_h],
                        &mut prims,
                    );
                }
            }
            box_prims(
                [0.0, -0.5 * (seat_d - back_t), leg_h + seat_t + 0.5 * back_h],
                [0.5 * seat_w, 0.5 * back_t, 0.5 * back_h],
                &mut prims,
            );
        }
    }
    for p in &mut prims {
        p.rotate_z(spec.pose);
    }
    // Canonical placement from the exact union bounding box.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &prims {
        let (c, half) = p.aabb();
        for a in 0..3 {
            lo[a] = lo[a].min(c[a] - half[a]);
            hi[a] = hi[a].max(c[a] + half[a]);
        }
    }
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    let mut max_half: f64 = 0.0;
    for a in 0..3 {
        max_half = max_half.max(0.5 * (hi[a] - lo[a]));
    }
    let k = 1.0 / max_half;
    for p in &mut prims {
        p.canonicalize(mid, k);
    }
    prims
}

/// Samples `spec.sample_count` points uniformly by area over the shape
/// surface. Deterministic in (spec, seed).
pub fn sample_shape(spec: &ShapeSpec, seed: u64) -> CoreResult<PointCloud> {
    spec.validate()?;
    let prims = build_prims(spec);
    let areas: Vec<f64> = prims.iter().map(Prim::area).collect();
    let total: f64 = areas.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(CoreError::DegenerateInput(format!("shape surface area {total}")));
    }
    let mut cum = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cum.push(acc);
    }
    let mut rng = stream(seed, TAG_SHAPE, 0);
    let mut points = Vec::with_capacity(spec.sample_count);
    for _ in 0..spec.sample_count {
        let u = rng.gen::<f64>() * total;
        let idx = cum.partition_point(|&c| c <= u).min(prims.len() - 1);
        points.push(prims[idx].sample(&mut rng));
    }
    PointCloud::new(points)
}

/// Largest severity `make_partial` accepts; higher values cannot leave
/// the guaranteed 10% of points behind.
pub const MAX_SEVERITY: f64 = 0.9;

/// Splits indices by projection onto `dir`: the `remove` indices with the
/// largest projections (ties by index) go to `removed`, the rest keep
/// their original order in `kept`.
fn split_by_projection(
    points: &[[f64; 3]],
    centroid: [f64; 3],
    dir: [f64; 3],
    remove: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let proj = |i: usize| {
        let p = points[i];
        (p[0] - centroid[0]) * dir[0] + (p[1] - centroid[1]) * dir[1] + (p[2] - centroid[2]) * dir[2]
    };
    order.sort_by(|&a, &b| {
        proj(b).partial_cmp(&proj(a)).expect("finite projections").then(a.cmp(&b))
    });
    let mut removed = order[..remove].to_vec();
    removed.sort_unstable();
    let mut kept = order[remove..].to_vec();
    kept.sort_unstable();
    (removed, kept)
}

fn unit_dir(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..TAU);
    let rxy = libm::sqrt((1.0 - z * z).max(0.0));
    [rxy * libm::cos(phi), rxy * libm::sin(phi), z]
}

/// Drops a contiguous region of `complete` to simulate occlusion.
///
/// `severity` is the fraction of points removed (rounded to a count, so
/// the realized fraction is exact up to rounding). `halfspace` removes
/// everything beyond a plane with random orientation; `viewpoint` removes
/// the points facing away from a random view direction. The result is a
/// subset of the input in original order. Severity must lie in
/// `(0, MAX_SEVERITY]` so at least 10% of the points survive.
pub fn make_partial(
    complete: &PointCloud,
    mode: PartialMode,
    severity: f64,
    seed: u64,
) -> CoreResult<PointCloud> {
    if !(severity > 0.0 && severity <= MAX_SEVERITY) {
        return Err(CoreError::InvalidArgument(format!(
            "severity {severity} outside (0, {MAX_SEVERITY}]"
        )));
    }
    let n = complete.len();
    let mut remove = libm::round(severity * n as f64) as usize;
    // Keep the documented floor: at least 10% of points (and at least one).
    let min_keep = (libm::ceil(0.1 * n as f64) as usize).max(1);
    if n - remove < min_keep {
        remove = n - min_keep;
    }
    let mut rng = stream(seed, TAG_PARTIAL, 0);
    let dir = unit_dir(&mut rng);
    let centroid = complete.centroid();
    let (_, kept) = match mode {
        // Removing the largest projections onto a random direction is a
        // random plane cut at the exact quantile for the requested count.
        PartialMode::Halfspace => split_by_projection(complete.points(), centroid, dir, remove),
        // Treat `dir` as the view direction: hidden points are those whose
        // centered position opposes it, i.e. the most negative projections.
        PartialMode::Viewpoint => {
            let neg = [-dir[0], -dir[1], -dir[2]];
            split_by_projection(complete.points(), centroid, neg, remove)
        }
    };
    Ok(complete.select(&kept))
}
