use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("embedding file {0} contains no vectors")]
    EmptyEmbeddings(PathBuf),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector has no direction")]
    ZeroNorm,

    #[error("invalid lexicon: {0}")]
    Lexicon(String),

    #[error("empty domain vector: none of the {lexicon_size} lexicon terms are in the embedding vocabulary")]
    EmptyDomainVector { lexicon_size: usize },

    #[error("degenerate domain direction: term embeddings cancel to a zero mean")]
    DegenerateDirection,

    #[error("sample size {requested} exceeds the {available} resolvable lexicon terms")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("remote scorer unreachable after {attempts} attempts, {unsent} documents unsent: {reason}")]
    RemoteUnavailable {
        attempts: u32,
        unsent: usize,
        reason: String,
    },

    #[error("remote scorer protocol violation: {0}")]
    Protocol(String),

    #[error("inconsistent statistics: {0}")]
    Inconsistent(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
