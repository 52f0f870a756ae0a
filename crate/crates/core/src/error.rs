use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("schema violation in utterance {utterance}: {message}")]
    Schema { utterance: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("degenerate baseline: {0}")]
    DegenerateBaseline(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
