use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Linear algebra or sampling failed on otherwise valid input.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    /// True for precondition violations, false for numeric failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numeric(_))
    }
}
