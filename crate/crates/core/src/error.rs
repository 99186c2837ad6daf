//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, estimation, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A measurement grid or search configuration violated its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A scenario or profile parameter was out of its physical range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An index addressed a frequency slot outside the grid.
    #[error("index {index} out of range for {len} frequencies")]
    IndexOutOfRange { index: usize, len: usize },

    /// An input series had the wrong length for the grid it was paired with.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// An input series was empty or too short for the operation.
    #[error("input too short: {0}")]
    TooFewSamples(String),

    /// An input contained NaN or infinity where a finite value is required.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A least-squares system was rank deficient or otherwise unsolvable.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    /// Reading or writing an output artifact failed.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
