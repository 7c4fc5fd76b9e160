use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented invariant. `field` names the offending
    /// input using the scenario-file key path where one exists.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
