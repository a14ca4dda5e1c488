use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite (smallest pivot or eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("retraction left the positive definite cone{} (minimum eigenvalue {min_eig:e})",
        component.map(|c| format!(" at component {c}")).unwrap_or_default())]
    RetractionFailure { component: Option<usize>, min_eig: f64 },

    #[error("matrix function overflow in {0}")]
    Overflow(&'static str),

    #[error("sample {row} has zero likelihood under every component")]
    Underflow { row: usize },

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("{0}")]
    Io(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Tags a retraction failure with the product factor it came from.
    pub(crate) fn at_component(self, index: usize) -> Self {
        match self {
            Error::RetractionFailure { min_eig, .. } => Error::RetractionFailure {
                component: Some(index),
                min_eig,
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
