use thiserror::Error;

/// Errors raised by the construction, encoding and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("requested dimension {requested} exceeds the configured maximum {max}")]
    SizeLimit { requested: usize, max: usize },

    #[error("matrix is not hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("internal consistency check `{check}` failed (residual {residual:e})")]
    Consistency { check: String, residual: f64 },

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn consistency(check: impl Into<String>, residual: f64) -> Self {
        Error::Consistency {
            check: check.into(),
            residual,
        }
    }
}
