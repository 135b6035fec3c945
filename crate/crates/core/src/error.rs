use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a shape or index precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid experiment, schedule or environment configuration.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Numerical failure during training (non-finite loss, logits or gradients).
    #[error("training error: {0}")]
    Training(String),

    #[error("environment error: {0}")]
    Environment(String),

    /// Malformed checkpoint, mask file or other serialized artifact.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            _ => 3,
        }
    }
}
