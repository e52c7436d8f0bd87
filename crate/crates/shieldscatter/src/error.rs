//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulator and detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A scene, schedule or solver parameter is out of its valid domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An argument violates a mathematical precondition (non-positive
    /// frequency, empty series, mismatched dimensions and the like).
    #[error("domain error: {0}")]
    Domain(String),

    /// Segmentation could not locate a backscatter-bearing region.
    #[error("no backscatter activity detected in trace")]
    NoBackscatterDetected,

    /// A segment is too short for the requested feature/profile geometry.
    #[error("segment too short: {actual} samples, need at least {required}")]
    SegmentTooShort { required: usize, actual: usize },

    /// Vector dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The dual solver hit its iteration cap before reaching the KKT
    /// tolerance; carries the final violation for diagnostics.
    #[error("solver did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    SolverFailure { iterations: usize, violation: f64 },

    /// A guard scenario could not be completed end to end.
    #[error("scenario failed on message {message_index}: {reason}")]
    Scenario { message_index: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// File-format violation while reading a trace or dataset.
    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
