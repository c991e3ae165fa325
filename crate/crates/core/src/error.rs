use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the evaluation pipeline.
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
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("token stream {path}: entry {entry} ({text:?}) is not a non-negative integer")]
    TokenEntry {
        path: PathBuf,
        entry: usize,
        text: String,
    },

    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { path: PathBuf, offset: usize },

    #[error("fixture {path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("duplicate fixture key ({tokenizer}, {scale}, {language}, {direction})")]
    DuplicateKey {
        tokenizer: String,
        scale: String,
        language: String,
        direction: String,
    },

    #[error("missing downstream score for {tokenizer} / {scale} / {language} / {direction}")]
    MissingCell {
        tokenizer: String,
        scale: String,
        language: String,
        direction: String,
    },

    #[error("missing metrics for tokenizer {tokenizer:?} on language {language:?}")]
    MissingMetrics { tokenizer: String, language: String },

    #[error("invalid tokenizer files: {0}")]
    InvalidTokenizer(String),

    #[error("symbol {0:?} is not in the vocabulary")]
    UnknownSymbol(String),

    #[error("token id {0} is not in the vocabulary")]
    UnknownId(u32),

    #[error("invalid regular expression: {0}")]
    Regex(String),

    #[error("no tokens")]
    NoTokens,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("curve has {0} points; at least {1} are required")]
    TooFewPoints(usize, usize),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid quadrature input: {0}")]
    Quadrature(String),

    #[error("dimension mismatch: model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("optimizer did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("downstream scores tie exactly for {0} and {1} on {2}")]
    DownstreamTie(String, String, String),

    #[error("comparison graph is disconnected")]
    Disconnected,

    #[error("invalid probability matrix: {0}")]
    InvalidMatrix(String),

    #[error("ranking name sets differ")]
    NameSetMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
