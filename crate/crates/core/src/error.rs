use thiserror::Error;

/// Errors raised by domain construction, operator assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel is singular at r = 0")]
    Singularity,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid density bounds: {0}")]
    InvalidBounds(String),

    #[error("density is not admissible: {0}")]
    NotAdmissible(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
