use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no token of sentence {sentence:?} has a pre-trained vector")]
    AllOutOfVocabulary { sentence: String },

    #[error("no trainable positions in the training corpus")]
    NoTrainablePositions,

    #[error("non-finite training loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("both labels are required, found only {0}")]
    SingleLabel(&'static str),

    #[error("no parse outcome for unflagged test instance {id:?}")]
    MissingOutcome { id: String },

    #[error("missing artifact {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{method} on {domain}: {source}")]
    Cell {
        method: String,
        domain: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_cell(self, method: &str, domain: &str) -> Self {
        Error::Cell {
            method: method.to_owned(),
            domain: domain.to_owned(),
            source: Box::new(self),
        }
    }

    /// Whether the error stems from configuration or usage rather than from
    /// a stage failing at runtime.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidArgument(_) | Error::MissingArtifact { .. }
        )
    }
}
