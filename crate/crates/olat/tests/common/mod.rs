//! Helpers shared by the integration and acceptance test targets.
#![allow(dead_code)] // not every target uses every helper

use std::path::PathBuf;
use std::process::Command;

use olat::trainer::CategoryData;
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
        ((s >> 40) as f64) / (1u64 << 23) as f64 - 1.0
    };
    let pts = (0..n).map(|_| [coord(), coord(), coord()]).collect();
    PointCloud::new(pts).expect("random cloud is valid")
}

/// In-memory training pools matching the config's cloud sizes.
pub fn tiny_data(cfg: &TrainConfig, n_partial: usize, n_complete: usize) -> CategoryData {
    CategoryData {
        partials: (0..n_partial).map(|i| random_cloud(cfg.n_points_in, 300 + i as u64)).collect(),
        completes: (0..n_complete)
            .map(|i| random_cloud(cfg.n_points_out, 900 + i as u64))
            .collect(),
    }
}

/// Creates a fresh scratch directory.
pub fn tmp_dir(label: &str) -> PathBuf {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap()
        .as_nanos();
    let dir = std::env::temp_dir().join(format!(
        "olat-it-{label}-{stamp}-{:?}",
        std::thread::current().id()
    ));
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

/// Command for the built `olat` binary.
pub fn olat_cmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_olat"))
}

/// Tiny-scale KEY=VALUE overrides for CLI runs.
pub fn tiny_overrides(data_dir: &std::path::Path) -> Vec<String> {
    [
        "seed=7",
        "categories=sphere",
        "sample_points=256",
        "n_train_partial=12",
        "n_train_complete=12",
        "n_eval=4",
        "d=8",
        "k_removal=8",
        "k_degrade=2",
        "n_points_in=64",
        "n_points_out=64",
        "enc_widths=16,24",
        "dec_widths=24",
        "disc_point_trunk=16",
        "disc_point_head=8",
        "disc_code_widths=12",
        "k_graph=6",
        "batch_size=4",
        "epochs=2",
        "ae_epochs=2",
        "log_every=1",
        "tau=0.05",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(std::iter::once(format!("data_dir={}", data_dir.display())))
    .collect()
}
