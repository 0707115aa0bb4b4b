use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid document {id}: {reason}")]
    InvalidDocument { id: String, reason: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("target entity {0:?} is not in the vocabulary")]
    UnknownTarget(String),

    #[error("document {0:?} has no target entity")]
    MissingTarget(String),

    #[error("target entity {0:?} is described by more than one document")]
    DuplicateTarget(String),

    #[error("no vector for entity {0:?}")]
    MissingVector(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("query vector has zero norm")]
    ZeroQuery,

    #[error("vocabulary does not match the model (hash {expected} vs {found})")]
    VocabMismatch { expected: String, found: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedFile(msg.into())
    }
}
