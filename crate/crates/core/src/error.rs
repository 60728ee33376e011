use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path} (line {line}, column {column}): {message}")]
    Format {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("bad grid file {path}: {message}")]
    GridFile { path: PathBuf, message: String },

    #[error("bad checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("validation error in image '{id}': {message}")]
    Validation { id: String, message: String },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("network produced a non-finite {0}")]
    NonFiniteOutput(&'static str),

    #[error("non-finite loss at step {step}: nsf={nsf}, fp={fp}, reg={reg}")]
    NonFiniteLoss {
        step: usize,
        nsf: f64,
        fp: f64,
        reg: f64,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
