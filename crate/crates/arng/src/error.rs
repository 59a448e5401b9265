use thiserror::Error;

/// Errors surfaced by the simulation and analysis stack.
#[derive(Debug, Error)]
pub enum ArngError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ArngError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ArngError::InvalidInput(msg.into())
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        ArngError::Config {
            field: field.into(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ArngError>;
