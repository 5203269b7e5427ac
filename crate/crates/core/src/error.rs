use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("slot {slot} is stale (requested serial {requested}, stored serial {stored:?})")]
    StaleIndex {
        slot: usize,
        requested: u64,
        stored: Option<u64>,
    },

    #[error("store is empty")]
    EmptyStore,

    #[error("warm-up not complete: store holds {have} transitions, minibatch needs {need}")]
    WarmupIncomplete { have: usize, need: usize },

    #[error("minibatch size mismatch: prioritized arm {ps}, uniform arm {rus}")]
    BatchMismatch { ps: usize, rus: usize },

    #[error("similarity needs at least 2 rows, got {0}")]
    TooFewRows(usize),

    #[error("environment episode already terminated; call reset first")]
    EpisodeOver,

    #[error("non-finite value in {what} at step {step}: {detail}")]
    NonFinite {
        what: &'static str,
        step: u64,
        detail: String,
    },

    #[error("unknown framework `{name}`; valid frameworks are: {valid}")]
    UnknownFramework { name: String, valid: String },

    #[error("cannot parse config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },

    #[error("I/O failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV failure at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
