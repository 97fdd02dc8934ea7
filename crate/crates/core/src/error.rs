use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the toolkit.
///
/// Variants fall into two families: IO failures ([`Error::Io`]) and
/// everything else, which signals that inputs violate a precondition or
/// an invariant. [`Error::is_io`] lets front ends map them to exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: cannot decode image: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("{context}: parse error: {message}")]
    Parse { context: String, message: String },

    #[error("duplicate item id {0:?}")]
    DuplicateItemId(String),

    #[error("item {id:?}: label out of range ({label} >= {num_classes})")]
    LabelOutOfRange { id: String, label: usize, num_classes: usize },

    #[error("class key {0:?} is not in the target label space")]
    UnknownClassKey(String),

    #[error("geometry mismatch: expected {expected}, found {found}")]
    GeometryMismatch { expected: String, found: String },

    #[error("severity {0} outside 1..=5")]
    InvalidSeverity(u8),

    #[error("missing grid cell ({kind}, {severity})")]
    MissingCell { kind: String, severity: u8 },

    #[error("prediction coverage mismatch: {0}")]
    Coverage(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
