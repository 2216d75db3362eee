use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}, column '{column}': {message}")]
    Cell {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{0}: file contains no data rows")]
    EmptyFile(PathBuf),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("row width {got} does not match training width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Failure class, used by the CLI to pick an exit code.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Csv(e) if e.is_io_error() => ErrorClass::Io,
            Error::RankDeficient | Error::Degenerate(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Io => 3,
            ErrorClass::Numerical => 4,
        }
    }
}
