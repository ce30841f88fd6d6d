use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = IcnnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum IcnnError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("bad magic: not a model file")]
    BadMagic,

    #[error("unsupported model file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated model file")]
    Truncated,

    #[error("inconsistent model file: {0}")]
    ShapeInconsistency(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("unknown category `{name}`; valid labels: {}", valid.join(", "))]
    UnknownCategory { name: String, valid: Vec<String> },

    #[error("input is empty after tokenization")]
    EmptyInput,

    #[error("no token has a positive value for category `{0}`")]
    EmptyPattern(String),

    #[error("sentence too short: length {0}, need at least 2")]
    SentenceTooShort(usize),
}

impl IcnnError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IcnnError::Io {
            path: path.into(),
            source,
        }
    }
}
