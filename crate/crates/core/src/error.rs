use thiserror::Error;

/// Errors raised by the estimators, oracles and generators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmiError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient samples: need more than k = {k} samples, got {n}")]
    InsufficientSamples { n: usize, k: usize },

    #[error("degenerate nearest-neighbor distances: {0}")]
    DegenerateDistance(String),

    #[error("non-finite sample value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid Gaussian specification: {0}")]
    InvalidSpec(String),

    #[error("near-singular correlation |rho| = {rho}")]
    NearSingular { rho: f64 },

    #[error("slice {slice}: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<SmiError>,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl SmiError {
    pub(crate) fn at_slice(self, slice: usize) -> Self {
        SmiError::Slice { slice, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, SmiError>;
