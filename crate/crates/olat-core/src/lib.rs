//! Core algorithms for unpaired point cloud completion through an
//! occlusion-gated latent space.
//!
//! Everything in this crate is pure computation over `alloc` containers:
//! point-cloud geometry kernels, evaluation metrics, training losses with
//! hand-verified gradients, the small MLP-family networks, the Adam
//! optimizer, parametric shape sampling, and the run configuration type.
//! File formats, dataset generation on disk, the training loop, and the
//! CLI live in the companion `olat` crate.
//!
//! The crate is `no_std` (with `alloc`); all transcendental math goes
//! through `libm`, which keeps results bit-identical across platforms.

#![no_std]
#![warn(missing_docs)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod config;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod math;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod shapes;
pub mod step;

pub use config::TrainConfig;
pub use error::CoreError;
pub use geometry::{OcclusionSeries, PointCloud};
pub use losses::LossBreakdown;
pub use models::{CodePair, ParameterSet, Role};
pub use step::Networks;
