use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures of the entailment oracle backends.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle request timed out")]
    Timeout,
    #[error("oracle transport failure: {0}")]
    Transport(String),
    #[error("oracle returned HTTP status {0}")]
    Status(u16),
    #[error("oracle protocol violation: {0}")]
    Protocol(String),
}

impl OracleError {
    /// Whether a retry may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            OracleError::Timeout | OracleError::Transport(_) => true,
            OracleError::Status(code) => *code >= 500 || *code == 429,
            OracleError::Protocol(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a tensor container (bad magic)")]
    BadMagic,
    #[error("unsupported container format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("container truncated while reading {0}")]
    Truncated(&'static str),
    #[error("container header invalid: {0}")]
    Header(String),
    #[error("tensor `{0}` missing from container")]
    MissingTensor(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("prompt parse error at marker `{marker}`: {reason}")]
    PromptParse { marker: &'static str, reason: String },

    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },

    #[error("duplicate study_id `{0}`")]
    DuplicateStudy(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("labeling failed at ground-truth pair {pair_index}: {source}")]
    Labeling {
        pair_index: usize,
        #[source]
        source: OracleError,
    },

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error("generated report references unknown study `{0}`")]
    Join(String),

    #[error("balancing error: {0}")]
    Balance(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error("feature error: {0}")]
    Feature(String),

    #[error("ranking metric needs both classes (positives={positives}, negatives={negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("bootstrap failed: {degenerate} of {total} resamples were degenerate")]
    Bootstrap { degenerate: usize, total: usize },

    #[error("aggregation `{method}` is missing {missing}")]
    Aggregation {
        method: &'static str,
        missing: &'static str,
    },

    #[error("selection error: {0}")]
    Selection(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing upstream artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("render error: {0}")]
    Render(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
