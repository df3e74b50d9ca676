//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by model construction, solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration values violate a documented precondition.
    #[error("config: {0}")]
    Config(String),

    /// Matrix or vector dimensions do not match the operation contract.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix that must be Hermitian (within tolerance) is not.
    #[error("matrix not Hermitian: max asymmetry {0:.3e}")]
    NotHermitian(f64),

    /// The conic solver could not certify the requested accuracy.
    #[error("solver accuracy limit: {0}")]
    AccuracyLimit(String),

    /// The conic solver determined the problem infeasible.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Enumeration or sampling budget exceeded a guard rail.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// Serialization or file I/O failure in the harness.
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
