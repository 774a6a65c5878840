use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum TsvqrError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The 1-D subproblem at `coordinate` is unbounded (negative or NaN curvature).
    #[error("solver failure at coordinate {coordinate}: diagonal entry {value} is not a valid curvature")]
    Solver { coordinate: usize, value: f64 },

    #[error("gram matrix with {rows} rows exceeds the configured limit of {limit}")]
    GramTooLarge { rows: usize, limit: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported model schema version {0}")]
    SchemaVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, TsvqrError>;

pub(crate) fn invalid(msg: impl Into<String>) -> TsvqrError {
    TsvqrError::InvalidArgument(msg.into())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(TsvqrError::DimensionMismatch { expected, found })
    }
}
