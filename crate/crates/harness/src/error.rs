use std::path::PathBuf;

use dentist_core::metrics::MetricsError;
use dentist_core::{BackendError, TemplateError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path} line {line}: duplicate id {id:?}")]
    DuplicateId { path: PathBuf, line: usize, id: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Template(#[from] TemplateError),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error(transparent)]
    Core(#[from] dentist_core::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
