use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("vocabulary empty after filtering")]
    EmptyVocabulary,

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("degenerate selection matrix")]
    DegenerateMatrix,

    #[error("invalid selection matrix: {0}")]
    InvalidMatrix(String),

    #[error("empty bucket {0}")]
    EmptyBucket(usize),

    #[error("no selected documents in bucket {0}")]
    NoSelectedDocuments(usize),

    #[error("constant target")]
    ConstantTarget,

    #[error("window too short: {len} observations, need at least {need}")]
    WindowTooShort { len: usize, need: usize },

    #[error("invalid window split: {0}")]
    InvalidSplit(String),

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("unknown tokens: {}", .0.join(", "))]
    UnknownTokens(Vec<String>),

    #[error("pruning space too large: {0} active tokens (limit 20)")]
    PruningSpaceTooLarge(usize),

    #[error("refinement collapsed vocabulary: {size} tokens left, need at least {k}")]
    RefinementCollapsed { size: usize, k: usize },

    #[error("flat planted signal after {0} attempts")]
    FlatPlantedSignal(usize),

    #[error("enumeration guard exceeded: {count} candidates (limit {limit})")]
    GuardExceeded { count: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 for bad input or usage, 3 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyCorpus
            | Error::EmptyVocabulary
            | Error::InvalidVocabulary(_)
            | Error::DegenerateMatrix
            | Error::InvalidMatrix(_)
            | Error::ConstantTarget
            | Error::InvalidSplit(_)
            | Error::UnknownTokens(_)
            | Error::PruningSpaceTooLarge(_)
            | Error::InvalidConfig(_)
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::Csv(_) => 2,
            _ => 3,
        }
    }
}
