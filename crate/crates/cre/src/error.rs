use std::io;
use std::path::PathBuf;

use cre_core::annotate::AnnotateError;
use cre_core::corpus::CorpusError;
use cre_core::eval::EvalError;
use cre_core::inoculate::InoculateError;
use cre_core::predict::PredictError;
use cre_core::qa::QaError;
use cre_core::schema::SchemaError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// A record that failed to parse or validate. `line` is 1-based for
    /// line-oriented files and the 1-based record number for JSON arrays;
    /// 0 when unknown.
    #[error("{}:{line}: {message}", path.display())]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("schema: {0}")]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("predictor: {0}")]
    Predict(#[from] PredictError),
    #[error("qa: {0}")]
    Qa(#[from] QaError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Inoculate(#[from] InoculateError),
    #[error("annotation: {0}")]
    Annotate(#[from] AnnotateError),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Record {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }

    /// Stable short name used in the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Record { .. } => "record",
            Error::Schema(_) => "schema",
            Error::Corpus(_) => "corpus",
            Error::Predict(_) => "predictor",
            Error::Qa(_) => "qa",
            Error::Eval(_) => "eval",
            Error::Inoculate(_) => "inoculate",
            Error::Annotate(_) => "annotation",
            Error::Usage(_) => "usage",
        }
    }
}
