use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("matrix is singular (column {column})")]
    Singular { column: usize },

    #[error("oracle cache was built for a different support")]
    CacheMismatch,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("warm start violates the sparsity budget")]
    InfeasibleWarmStart,

    #[error("LP solver failure: {0}")]
    Lp(String),

    #[error("data generation failed: {0}")]
    Generation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
