use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite gradient entry at index {index}; step rejected")]
    NonFiniteGradient { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("buffer not ready: {0}")]
    NotReady(&'static str),
    #[error("episode already terminated")]
    Terminal,
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error("config: {field}: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
