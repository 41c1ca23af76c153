use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("event {index} at time {time} precedes an involved entity's last event at {last}")]
    Ordering { index: usize, time: f64, last: f64 },

    #[error("non-finite value at event {index}: {message}")]
    Numeric { index: usize, message: String },

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
