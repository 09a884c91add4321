use std::path::PathBuf;

use thiserror::Error;

use crate::evaluators::EvalError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Config text did not match the schema. `field` is the JSON path of the offending value.
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("operating coverage: {0}")]
    Coverage(String),

    #[error("missing metric `{0}`")]
    MissingMetric(String),

    #[error("objective names differ: {0}")]
    NameMismatch(String),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("engine: {0}")]
    Engine(String),

    #[error("evaluation failed for {context}: {source}")]
    Evaluation {
        context: String,
        #[source]
        source: EvalError,
    },

    #[error("table: {0}")]
    Table(String),

    #[error("grid has {size} designs, above the exhaustive cap of {cap}; use the optimizer instead")]
    GridTooLarge { size: usize, cap: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad user input (config, specs, tables) rather than by
    /// an evaluator or the runtime.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Dimension { .. }
                | Error::NameMismatch(_)
                | Error::MissingMetric(_)
                | Error::GridTooLarge { .. }
                | Error::Table(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
