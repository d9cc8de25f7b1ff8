//! Error type spanning the filesystem, training, and CLI layers.

use std::path::{Path, PathBuf};

use olat_core::error::CoreError;

/// Everything that can go wrong outside the numerics core.
#[derive(Debug, thiserror::Error)]
pub enum OlatError {
    /// Configuration or usage rejected before any work started.
    #[error("config error: {0}")]
    Config(String),
    /// Training aborted on a non-finite loss.
    #[error("training diverged: {0}")]
    Divergence(String),
    /// A file's contents violate its format; `offset` is in bytes.
    #[error("{path}: {msg} (byte {offset})")]
    Format {
        /// Offending file.
        path: PathBuf,
        /// Byte offset where the violation was detected.
        offset: u64,
        /// What was wrong.
        msg: String,
    },
    /// Filesystem failure, tagged with the path involved.
    #[error("{path}: {source}")]
    Io {
        /// Path of the failed operation.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// Numerics-layer failure.
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl OlatError {
    /// Process exit code: 2 for divergence, 3 for config errors, 1
    /// otherwise (0 is reserved for success).
    pub fn exit_code(&self) -> i32 {
        match self {
            OlatError::Config(_) => 3,
            OlatError::Divergence(_) => 2,
            _ => 1,
        }
    }

    /// Wraps an I/O error with its path.
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        OlatError::Io { path: path.to_path_buf(), source }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, OlatError>;
