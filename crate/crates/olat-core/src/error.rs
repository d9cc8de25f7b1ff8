//! Error type shared by the core modules.

use alloc::string::String;
use core::fmt;

use crate::models::Role;

/// Errors produced by geometry kernels, metrics, losses, and networks.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// Input admits no well-defined answer (e.g. zero-extent cloud).
    DegenerateInput(String),
    /// Two vectors or arrays that must agree in size do not.
    DimensionMismatch {
        /// Expected length or shape description.
        expected: usize,
        /// Length actually supplied.
        got: usize,
    },
    /// A parameter set was used for the wrong network.
    RoleMismatch {
        /// Role the operation requires.
        expected: Role,
        /// Role carried by the supplied parameter set.
        got: Role,
    },
    /// A computation produced or received a NaN/Inf; names the term.
    NonFinite(&'static str),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            CoreError::DegenerateInput(msg) => write!(f, "degenerate input: {msg}"),
            CoreError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            CoreError::RoleMismatch { expected, got } => {
                write!(f, "parameter set role mismatch: expected {expected}, got {got}")
            }
            CoreError::NonFinite(term) => write!(f, "non-finite value in term `{term}`"),
        }
    }
}

impl core::error::Error for CoreError {}

/// Convenience alias used throughout the crate.
pub type CoreResult<T> = Result<T, CoreError>;
