use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimensions must be at least 1 (got {rows}x{cols})")]
    ZeroDimension { rows: usize, cols: usize },

    #[error("inconsistent dimensions: {0}")]
    InconsistentDims(String),

    #[error("unsupported structure: {0}")]
    Unsupported(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires a {expected} matrix, got {found}")]
    WrongKind {
        expected: &'static str,
        found: String,
    },

    #[error("combinatorial guard exceeded: {count} supports > limit {limit}")]
    GuardExceeded { count: u128, limit: u128 },

    #[error("equitable coloring failed: {0}")]
    ColoringFailure(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
