//! On-disk formats: point clouds, checkpoints, dataset manifests, and
//! metric reports.
//!
//! Every decoder works on in-memory bytes and reports violations with a
//! byte offset; the path-taking wrappers attach the file name.

use std::fs;
use std::path::Path;

use crate::error::{OlatError, Result};

pub mod checkpoint;
pub mod cloud;
pub mod manifest;
pub mod report;

/// A format violation at a byte offset, before a path is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatViolation {
    /// Byte offset where the violation was detected.
    pub offset: u64,
    /// What was wrong.
    pub msg: String,
}

impl FormatViolation {
    /// Violation at a known offset.
    pub fn at(offset: u64, msg: impl Into<String>) -> Self {
        Self { offset, msg: msg.into() }
    }

    /// Input ended at `offset` while `what` was still expected.
    pub fn eof(offset: usize, what: &str) -> Self {
        Self { offset: offset as u64, msg: format!("unexpected end of data, expected {what}") }
    }

    /// Attaches the file path, producing the crate error.
    pub fn into_error(self, path: &Path) -> OlatError {
        OlatError::Format { path: path.to_path_buf(), offset: self.offset, msg: self.msg }
    }
}

/// Reads a whole file, tagging I/O errors with the path.
pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| OlatError::io(path, e))
}

/// Writes a whole file, tagging I/O errors with the path.
pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| OlatError::io(path, e))
}

/// Writes via a sibling temporary file and renames into place, so the
/// destination is never observed half-written.
pub(crate) fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| OlatError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| OlatError::io(path, e))
}
