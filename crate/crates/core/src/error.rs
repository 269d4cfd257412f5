use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("inconsistent merge rule at line {line} (`{rule}`): {reason}")]
    MergeRule {
        line: usize,
        rule: String,
        reason: String,
    },

    #[error("symbol {0:?} is not in the vocabulary")]
    UnknownSymbol(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("subsample empty; raise b")]
    EmptySubsample,

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("tokenizer mismatch: `{expected}` vs `{found}`")]
    TokenizerMismatch { expected: String, found: String },

    #[error("block {0:016x} has no tokens")]
    EmptyBlock(u64),

    #[error("no blocks to score")]
    NoBlocks,

    #[error("budget of {budget} tokens exceeds the {total} admitted tokens")]
    BudgetTooLarge { budget: u64, total: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reference id set is empty")]
    EmptyReference,

    #[error(
        "external scores cover {covered} of {total} blocks (need 99%); first missing: {}",
        format_ids(missing)
    )]
    InsufficientCoverage {
        covered: usize,
        total: usize,
        missing: Vec<u64>,
    },

    #[error("minority corpus too small for a={requested}%; max achievable a={max_achievable:.6}%")]
    MinorityTooSmall { requested: f64, max_achievable: f64 },

    #[error("feature configuration mismatch: {0}")]
    FeatureMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_ids(ids: &[u64]) -> String {
    ids.iter()
        .map(|id| format!("{id:016x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
