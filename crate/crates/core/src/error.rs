//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configured column is missing from the input, or the schema itself is inconsistent.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Training or scoring requires both classes to be present.
    #[error("single-class labels: {0}")]
    SingleClass(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Verdicts and ground truth do not cover the same periods.
    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
