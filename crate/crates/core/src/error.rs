use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("wav error: {0}")]
    Wav(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("signal too short: {0}")]
    TooShort(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("label file {path}: {message}")]
    Labels { path: PathBuf, message: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure is numeric (training divergence, NaN) rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Divergence(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
