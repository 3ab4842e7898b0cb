//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by any module of this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A network or DGP specification violates its invariants.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Incompatible dimensions between parameters, batches, or vectors.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A loss, gradient, or nuisance evaluation produced NaN or infinity.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A dataset or dataset operation violates a precondition.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Experiment configuration problems (bad YAML values, version, paths).
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<serde_yaml::Error> for Error {
    fn from(e: serde_yaml::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
