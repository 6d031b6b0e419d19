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

    #[error("manifest schema error: missing column `{column}`")]
    Schema { column: String },

    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("split mismatch: {0} vs {1}")]
    SplitMismatch(String, String),

    #[error("unsupported audio format: {field} ({detail})")]
    UnsupportedFormat { field: &'static str, detail: String },

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("input too short: need at least {min} {unit}, got {got}")]
    TooShort {
        min: usize,
        got: usize,
        unit: &'static str,
    },

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("non-finite values in {layer}")]
    Numerical { layer: String },

    #[error("search space too large: {0} candidates")]
    Capacity(u128),

    #[error("hypothesis/reference count mismatch: {hyps} vs {refs}")]
    Pairing { hyps: usize, refs: usize },

    #[error("no successful experiment records")]
    NoResult,

    #[error("unknown table layout `{0}`")]
    Layout(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 3,
            Error::Config { .. } | Error::Layout(_) | Error::Domain(_) => 1,
            _ => 2,
        }
    }
}
