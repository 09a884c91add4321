//! Sources of per-(design, operating value) metrics.

pub mod subprocess;
pub mod surrogate;
pub mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use thiserror::Error;

use crate::design_space::{DesignPoint, DesignSpace};
use crate::error::{Error, Result};
use crate::robust::EvaluationRecord;

pub use subprocess::SubprocessEvaluator;
pub use surrogate::{lna_metrics, pa_metrics, LnaSurrogate, PaSurrogate};
pub use table::{dump_table, load_table, read_table, write_table, EvaluationTable};

pub type MetricSet = BTreeMap<String, f64>;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("input out of range: {0}")]
    OutOfRange(String),
    #[error("missing metric `{0}`")]
    MissingMetric(String),
    #[error("metric `{name}` is not finite ({value})")]
    NonFinite { name: String, value: f64 },
    #[error("no table entry for design {design} at operating value {operating}")]
    MissingKey { design: String, operating: f64 },
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("child process exited: {0}")]
    ChildExited(String),
    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: u64, got: i64 },
    #[error("child reported: {0}")]
    Child(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A black box producing metrics for one design at one operating value.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, design: &DesignPoint, operating: f64) -> Result<MetricSet, EvalError>;

    /// Metric names this evaluator guarantees, in output order.
    fn metric_names(&self) -> Vec<String>;
}

impl<E: Evaluator + ?Sized> Evaluator for Arc<E> {
    fn evaluate(&self, design: &DesignPoint, operating: f64) -> Result<MetricSet, EvalError> {
        (**self).evaluate(design, operating)
    }

    fn metric_names(&self) -> Vec<String> {
        (**self).metric_names()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&self, design: &DesignPoint, operating: f64) -> Result<MetricSet, EvalError> {
        (**self).evaluate(design, operating)
    }

    fn metric_names(&self) -> Vec<String> {
        (**self).metric_names()
    }
}

fn check_finite(metrics: &MetricSet) -> Result<(), EvalError> {
    match metrics.iter().find(|(_, v)| !v.is_finite()) {
        Some((name, &value)) => Err(EvalError::NonFinite { name: name.clone(), value }),
        None => Ok(()),
    }
}

/// Evaluates `design` at every operating value, in grid order.
pub fn sweep_design<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &DesignSpace,
    design: &DesignPoint,
) -> Result<Vec<EvaluationRecord>> {
    space
        .operating()
        .values()
        .iter()
        .map(|&op| {
            evaluator
                .evaluate(design, op)
                .and_then(|m| check_finite(&m).map(|_| m))
                .map(|metrics| EvaluationRecord::new(design.clone(), op, metrics))
                .map_err(|source| Error::Evaluation {
                    context: format!("design {design} at {} = {op}", space.operating().name()),
                    source,
                })
        })
        .collect()
}

/// Runs `f` over `items` on `workers` threads (sequentially when `workers <= 1`),
/// keeping input order in the output.
pub fn map_ordered<I, O, F>(items: &[I], workers: usize, f: F) -> Result<Vec<O>>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> Result<O> + Sync + Send,
{
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect::<Vec<_>>().into_iter().collect())
}

/// Evaluates the whole grid; one record group per design in enumeration order.
pub fn evaluate_grid<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &DesignSpace,
    workers: usize,
) -> Result<Vec<Vec<EvaluationRecord>>> {
    let designs = space.enumerate_grid();
    map_ordered(&designs, workers, |d| sweep_design(evaluator, space, d))
}

/// Evaluator choice as written on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluatorSpec {
    SurrogatePa,
    SurrogateLna,
    Table(PathBuf),
    Exec(String),
}

impl FromStr for EvaluatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surrogate-pa" => Ok(Self::SurrogatePa),
            "surrogate-lna" => Ok(Self::SurrogateLna),
            _ => {
                if let Some(path) = s.strip_prefix("table:").filter(|p| !p.is_empty()) {
                    Ok(Self::Table(PathBuf::from(path)))
                } else if let Some(cmd) = s.strip_prefix("exec:").filter(|c| !c.trim().is_empty()) {
                    Ok(Self::Exec(cmd.to_string()))
                } else {
                    Err(Error::Validation(format!(
                        "unknown evaluator `{s}`; expected surrogate-pa, surrogate-lna, table:<path> or exec:<command>"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for EvaluatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SurrogatePa => f.write_str("surrogate-pa"),
            Self::SurrogateLna => f.write_str("surrogate-lna"),
            Self::Table(p) => write!(f, "table:{}", p.display()),
            Self::Exec(c) => write!(f, "exec:{c}"),
        }
    }
}

impl EvaluatorSpec {
    /// Builds the evaluator. `metric_names` is what a subprocess must return.
    pub fn build(&self, space: &DesignSpace, metric_names: &[String]) -> Result<Arc<dyn Evaluator>> {
        Ok(match self {
            Self::SurrogatePa => Arc::new(PaSurrogate::new(space)?),
            Self::SurrogateLna => Arc::new(LnaSurrogate::new(space)?),
            Self::Table(path) => Arc::new(load_table(path, space)?),
            Self::Exec(cmd) => Arc::new(SubprocessEvaluator::new(cmd.clone(), space, metric_names.to_vec())),
        })
    }
}
