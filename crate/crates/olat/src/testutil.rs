//! Shared helpers for this crate's unit tests.

use std::path::PathBuf;

use olat_core::config::TrainConfig;
use olat_core::geometry::PointCloud;
use olat_core::rng::mix;

/// A configuration small enough for fast in-test training.
pub fn tiny_config() -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.d = 6;
    cfg.k_removal = 4;
    cfg.k_degrade = 2;
    cfg.n_points_in = 24;
    cfg.n_points_out = 16;
    cfg.enc_widths = vec![8, 12];
    cfg.dec_widths = vec![10];
    cfg.disc_point_trunk = vec![8];
    cfg.disc_point_head = vec![6];
    cfg.disc_code_widths = vec![8];
    cfg.k_graph = 4;
    cfg.batch_size = 3;
    cfg.epochs = 2;
    cfg.ae_epochs = 2;
    cfg.log_every = 1;
    cfg.validate().expect("tiny config must be valid");
    cfg
}

/// A deterministic f32-clean random cloud with `n` points.
pub fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut s = mix(seed);
    let mut coord = || {
        s = mix(s);
        // Map the top 24 bits onto [-1, 1); exact in f32.
        ((s >> 40) as f64) / (1u64 << 23) as f64 - 1.0
    };
    let pts = (0..n).map(|_| [coord(), coord(), coord()]).collect();
    PointCloud::new(pts).expect("random cloud is valid")
}

/// Creates a fresh scratch directory under the target dir.
pub fn tmp_dir(label: &str) -> PathBuf {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap()
        .as_nanos();
    let dir = std::env::temp_dir().join(format!("olat-test-{label}-{stamp}-{:?}", std::thread::current().id()));
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}
