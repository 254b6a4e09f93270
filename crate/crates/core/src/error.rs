use std::path::PathBuf;

use thiserror::Error;

use crate::data::AftParams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    Convergence {
        iterations: usize,
        grad_norm: f64,
        last: Box<AftParams>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A failure while scoring one specific model.
    #[error("model {model:?}: {source}")]
    Model {
        model: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    /// A failure while screening one covariate.
    #[error("covariate {index}: {source}")]
    Covariate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: row {row}, column {column:?}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Domain(_) => "domain",
            Error::Convergence { .. } => "convergence",
            Error::Numerical(_) => "numerical",
            Error::Model { source, .. }
            | Error::Covariate { source, .. }
            | Error::Iteration { source, .. } => source.kind(),
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn in_model(self, model: &[usize]) -> Self {
        Error::Model {
            model: model.to_vec(),
            source: Box::new(self),
        }
    }
}
