use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("graph contract violated: {0}")]
    GraphContract(String),

    #[error("graph contains a directed cycle")]
    Cycle,

    #[error(
        "graph is not a valid CPDAG: no consistent DAG extension found after {attempts} attempts"
    )]
    InvalidCpdag { attempts: usize },

    #[error("conditioning submatrix is numerically singular")]
    SingularConditioning,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("value {0} is outside the domain of the Fisher z-transform")]
    FisherDomain(f64),

    #[error("robust scale is zero (degenerate sample)")]
    DegenerateScale,

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
