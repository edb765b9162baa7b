use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed document {path}: {message}")]
    Document { path: PathBuf, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("unknown level {level:?} in column {column:?}")]
    UnknownLevel { column: String, level: String },
    #[error("cannot parse {value:?} as a number in column {column:?} (row {row})")]
    NumericParse {
        column: String,
        row: usize,
        value: String,
    },
    #[error("column {column:?} has kind {found}, expected {expected}")]
    KindMismatch {
        column: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("column {0:?} has no observed values to draw from")]
    NoDonors(String),
    #[error("dataset still contains {0} missing cells")]
    MissingCells(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model fit failed: {0}")]
    Fit(String),
    #[error("predictor layout mismatch: {0}")]
    Layout(String),
    #[error("invalid synthesizer spec: {0}")]
    Spec(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
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

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the error (or any wrapped cause) is a configuration problem.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Document { .. } | Error::Schema(_) => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}
