//! Geometry and metric kernels checked against independent brute-force
//! oracles on randomized instances.

use rand::Rng;

use olat_core::geometry::{
    degrade_indices, denormalize, knn, make_occlusion_series_at, normalize, resample, PointCloud,
};
use olat_core::metrics::{chamfer, f1_score, mmd, ucd};
use olat_core::rng::{mix, stream};

fn random_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
    let pts = (0..n)
        .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
        .collect();
    PointCloud::new(pts).unwrap()
}

fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

#[test]
fn knn_matches_sort_everything_oracle() {
    for case in 0..100u64 {
        let mut rng = stream(0xAAA, 1, case);
        let nq = rng.gen_range(1..30);
        let nr = rng.gen_range(1..40);
        let query = random_cloud(&mut rng, nq);
        let reference = random_cloud(&mut rng, nr);
        let k = rng.gen_range(1..=nr);
        let got = knn(&query, &reference, k).unwrap();
        for (qi, neighbors) in got.iter().enumerate() {
            let mut all: Vec<(f64, usize)> = reference
                .points()
                .iter()
                .enumerate()
                .map(|(ri, &rp)| (d2(query.points()[qi], rp), ri))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(neighbors.len(), k);
            for (slot, nb) in neighbors.iter().enumerate() {
                assert_eq!(nb.index, all[slot].1, "case {case} query {qi} slot {slot}");
                assert_eq!(nb.dist_sq, all[slot].0);
            }
        }
    }
}

#[test]
fn chamfer_matches_double_loop_oracle() {
    for case in 0..100u64 {
        let mut rng = stream(0xBBB, 2, case);
        let na = rng.gen_range(1..25);
        let nb = rng.gen_range(1..25);
        let a = random_cloud(&mut rng, na);
        let b = random_cloud(&mut rng, nb);
        let got = chamfer(&a, &b);
        let dir = |x: &PointCloud, y: &PointCloud| {
            x.points()
                .iter()
                .map(|&p| y.points().iter().map(|&q| d2(p, q)).fold(f64::INFINITY, f64::min))
                .sum::<f64>()
                / x.len() as f64
        };
        let want = dir(&a, &b) + dir(&b, &a);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "case {case}: {got} vs {want}");
        let u = ucd(&a, &b);
        assert!((u - dir(&a, &b)).abs() <= 1e-9 * want.max(1.0));
        // Metric axioms on samples: symmetry and identity.
        let flipped = chamfer(&b, &a);
        assert!((got - flipped).abs() <= 1e-12 * got.max(1.0));
        assert_eq!(chamfer(&a, &a), 0.0);
    }
}

#[test]
fn f1_matches_counting_oracle() {
    for case in 0..100u64 {
        let mut rng = stream(0xCCC, 3, case);
        let np = rng.gen_range(1..30);
        let nt = rng.gen_range(1..30);
        let pred = random_cloud(&mut rng, np);
        let truth = random_cloud(&mut rng, nt);
        let tau = rng.gen_range(0.05..2.0);
        let got = f1_score(&pred, &truth, tau).unwrap();
        let within = |x: &PointCloud, y: &PointCloud| {
            x.points()
                .iter()
                .filter(|&&p| {
                    y.points().iter().map(|&q| d2(p, q)).fold(f64::INFINITY, f64::min).sqrt()
                        <= tau
                })
                .count() as f64
                / x.len() as f64
        };
        let acc = within(&pred, &truth);
        let comp = within(&truth, &pred);
        let want = if acc + comp == 0.0 { 0.0 } else { 2.0 * acc * comp / (acc + comp) };
        assert!((got - want).abs() < 1e-12, "case {case}: {got} vs {want}");
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn mmd_is_mean_of_minimum_chamfer() {
    let mut rng = stream(0xDDD, 4, 0);
    let gen_set: Vec<PointCloud> = (0..4).map(|_| random_cloud(&mut rng, 12)).collect();
    let refs: Vec<PointCloud> = (0..5).map(|_| random_cloud(&mut rng, 12)).collect();
    let got = mmd(&gen_set, &refs).unwrap();
    let mut want = 0.0;
    for r in &refs {
        want += gen_set
            .iter()
            .map(|g| chamfer(g, r))
            .fold(f64::INFINITY, f64::min);
    }
    want /= refs.len() as f64;
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn normalize_centers_scales_and_round_trips() {
    for case in 0..100u64 {
        let mut rng = stream(0xEEE, 5, case);
        let n = rng.gen_range(2..40);
        let cloud = random_cloud(&mut rng, n);
        let (norm, centroid, scale) = normalize(&cloud).unwrap();
        let c = norm.centroid();
        for a in 0..3 {
            assert!(c[a].abs() < 1e-9, "case {case}: centroid {c:?}");
        }
        let max_abs = norm
            .points()
            .iter()
            .flat_map(|p| p.iter().map(|v| v.abs()))
            .fold(0.0f64, f64::max);
        assert!((max_abs - 1.0).abs() < 1e-12, "case {case}: max {max_abs}");
        let back = denormalize(&norm, centroid, scale);
        for (p, q) in cloud.points().iter().zip(back.points()) {
            for a in 0..3 {
                assert!((p[a] - q[a]).abs() < 1e-9 * p[a].abs().max(1.0));
            }
        }
    }
}

#[test]
fn occlusion_series_removes_exactly_the_nearest_neighborhoods() {
    for case in 0..60u64 {
        let mut rng = stream(0xFFF, 6, case);
        let n = rng.gen_range(12..60);
        let k = rng.gen_range(1..=(n - 1) / 2 - 1).max(1);
        if n <= 2 * k {
            continue;
        }
        let cloud = random_cloud(&mut rng, n);
        let seed_idx = rng.gen_range(0..n);
        let series = make_occlusion_series_at(&cloud, k, seed_idx).unwrap();
        assert_eq!(series.base.len(), n);
        assert_eq!(series.mid.len(), n - k);
        assert_eq!(series.small.len(), n - 2 * k);
        assert_eq!(series.removal_count, k);

        // Oracle: distances to the seed point, ascending (ties by index).
        let seed = cloud.points()[seed_idx];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            d2(cloud.points()[a], seed)
                .partial_cmp(&d2(cloud.points()[b], seed))
                .unwrap()
                .then(a.cmp(&b))
        });
        let removed_k: std::collections::BTreeSet<usize> = order[..k].iter().copied().collect();
        let removed_2k: std::collections::BTreeSet<usize> =
            order[..2 * k].iter().copied().collect();
        let expect_mid: Vec<[f64; 3]> = (0..n)
            .filter(|i| !removed_k.contains(i))
            .map(|i| cloud.points()[i])
            .collect();
        let expect_small: Vec<[f64; 3]> = (0..n)
            .filter(|i| !removed_2k.contains(i))
            .map(|i| cloud.points()[i])
            .collect();
        assert_eq!(series.mid.points(), &expect_mid[..], "case {case}");
        assert_eq!(series.small.points(), &expect_small[..], "case {case}");
    }
}

#[test]
fn degrade_indices_match_union_of_topk_oracle() {
    for case in 0..60u64 {
        let mut rng = stream(0x123, 7, case);
        let n_pred = rng.gen_range(5..30);
        let n_part = rng.gen_range(1..20);
        let predicted = random_cloud(&mut rng, n_pred);
        let partial = random_cloud(&mut rng, n_part);
        let k = rng.gen_range(1..=predicted.len());
        let got = degrade_indices(&predicted, &partial, k).unwrap();
        let mut want = std::collections::BTreeSet::new();
        for &p in partial.points() {
            let mut all: Vec<(f64, usize)> = predicted
                .points()
                .iter()
                .enumerate()
                .map(|(i, &q)| (d2(p, q), i))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &(_, i) in &all[..k] {
                want.insert(i);
            }
        }
        let want: Vec<usize> = want.into_iter().collect();
        assert_eq!(got, want, "case {case}");
    }
}

#[test]
fn resample_contracts_hold() {
    for case in 0..60u64 {
        let mut rng = stream(0x456, 8, case);
        let n = rng.gen_range(3..40);
        let cloud = random_cloud(&mut rng, n);
        let same = resample(&cloud, n, mix(case)).unwrap();
        assert_eq!(same.points(), cloud.points());

        let m_small = rng.gen_range(1..n);
        let small = resample(&cloud, m_small, mix(case) ^ 1).unwrap();
        assert_eq!(small.len(), m_small);
        let mut seen = std::collections::BTreeSet::new();
        for p in small.points() {
            let idx = cloud.points().iter().position(|q| q == p).expect("subset");
            assert!(seen.insert(idx), "case {case}: duplicate in downsample");
        }

        let m_big = n + rng.gen_range(1..20);
        let big = resample(&cloud, m_big, mix(case) ^ 2).unwrap();
        assert_eq!(big.len(), m_big);
        for p in cloud.points() {
            assert!(big.points().contains(p), "case {case}: original point dropped");
        }
        for p in big.points() {
            assert!(cloud.points().contains(p), "case {case}: invented point");
        }
    }
}
