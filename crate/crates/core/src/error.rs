//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("matrix is singular to working precision at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("numerical breakdown in {op}: {detail}")]
    NumericalBreakdown { op: &'static str, detail: String },

    #[error("capacity exceeded: {detail}")]
    CapacityExceeded { detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: String,
        expected: u64,
        actual: u64,
    },

    #[error("non-finite gradient in block '{block}', example {example}, flat index {index}")]
    NonFiniteGradient {
        block: String,
        example: usize,
        index: usize,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
