//! Filesystem, training-loop, and CLI layer over the numerics core:
//! dataset generation, the two-stage optimization, evaluation reports,
//! and the on-disk formats tying them together.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod formats;
pub mod evaluate;
pub mod projection;
pub mod trainer;

#[cfg(test)]
mod testutil;

pub use error::{OlatError, Result};
