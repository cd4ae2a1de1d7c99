use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    TextFormat { line: usize, message: String },

    #[error("word2vec header: {0}")]
    Header(String),

    #[error("record {record}: {message}")]
    BinaryRecord { record: usize, message: String },

    #[error("duplicate token {token:?} (entry {position})")]
    DuplicateToken { token: String, position: usize },

    #[error("row {row}, column {column:?}: {message}")]
    Table {
        row: usize,
        column: String,
        message: String,
    },

    #[error("duplicate entity name {0:?}")]
    DuplicateEntity(String),

    #[error("log10 transform of non-positive value {value} for entity {entity:?}, target {target:?}")]
    NonPositiveLog {
        entity: String,
        target: String,
        value: f64,
    },

    #[error("transforms were already applied to this table")]
    TransformsAlreadyApplied,

    #[error("unknown target {0:?}")]
    UnknownTarget(String),

    #[error("every entity was dropped while joining embeddings")]
    AllEntitiesDropped,

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero-norm vector")]
    ZeroVector,

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("R² undefined: test targets have zero variance")]
    UndefinedR2,

    #[error("out of vocabulary: {}", .0.join(", "))]
    OutOfVocabulary(Vec<String>),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
