use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("inconsistent variate count at line {line}: expected {expected}, found {found}")]
    InconsistentVariates {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at line {line}")]
    NonFinite { line: usize },

    #[error("empty dataset: {0}")]
    Empty(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("variate out of range: requested {requested}, dataset has {available}")]
    VariateOutOfRange { requested: usize, available: usize },

    #[error("sample out of range: requested {requested}, dataset has {available}")]
    SampleOutOfRange { requested: usize, available: usize },

    #[error("matrix rank {achievable} is below the requested {requested} components")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("provider failure: {0}")]
    Provider(String),

    #[error("timed out after {0:.1} s")]
    Timeout(f64),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
