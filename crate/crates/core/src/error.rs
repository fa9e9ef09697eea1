use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A consistency check failed (parameter inequalities, lemma checks).
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("refusing instance: {what} = {got} exceeds the limit of {limit}")]
    TooLarge { what: &'static str, got: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Validation failures are "the check ran and said no"; everything else is
    /// bad input or an environment problem.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
