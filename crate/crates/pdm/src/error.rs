use crate::linalg::BlockVector;

/// Errors produced by solver construction, configuration, and iteration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch on {axis}: expected {expected}, got {actual}")]
    DimensionMismatch {
        axis: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("arc index {index} out of range for universe of size {universe}")]
    IndexOutOfRange { index: usize, universe: usize },
    #[error("operator norm of an empty constraint system is undefined")]
    EmptyIndexSet,
    #[error("I is not a subset of J")]
    NotASubset,
    #[error(
        "stepsize interval [{tau}, {upper}] is empty for the active set; decrease tau"
    )]
    EmptyStepsizeInterval { tau: f64, upper: f64 },
    #[error(
        "inner proximal solve stopped after {iterations} iterations with residual {residual:.3e}"
    )]
    ProxDidNotConverge {
        iterations: usize,
        residual: f64,
        best: Box<BlockVector>,
    },
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("missing reference solution: {0}")]
    MissingReference(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            message: message.into(),
        }
    }
}
