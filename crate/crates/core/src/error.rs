use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no weight-{w} support of length {r} can satisfy the distance constraint L={l}")]
    Infeasible { r: usize, w: usize, l: usize },

    #[error("gave up after {attempts} attempts: {what}")]
    RetriesExhausted { attempts: usize, what: &'static str },

    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}
