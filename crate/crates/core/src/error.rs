use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("line {line}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("no samples")]
    NoSamples,

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("insufficient samples for order {order}: record has {samples}")]
    InsufficientSamples { order: usize, samples: usize },

    #[error("insufficient data for variance estimate: {rows} rows, {params} parameters")]
    InsufficientDof { rows: usize, params: usize },

    #[error("ill-conditioned; use ridge_fit")]
    IllConditioned,

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("no admissible model")]
    NoAdmissibleModel,

    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },

    #[error("model store: {0}")]
    Store(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code: 2 config error, 3 data error, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::IllConditioned
            | Error::NotPositiveDefinite { .. }
            | Error::Asymmetric(_)
            | Error::NoAdmissibleModel => 4,
            _ => 3,
        }
    }
}
