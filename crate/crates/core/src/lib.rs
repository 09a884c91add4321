//! Worst-case robust multi-objective optimization over gridded design spaces.
//!
//! The pipeline is: enumerate a [`DesignSpace`], evaluate every design at every
//! operating point, collapse each design to its per-objective worst case
//! ([`robust`]), then either extract the Pareto front ([`pareto`]) or scalarize
//! with target/limit/priority penalties ([`objectives`]) and search with the
//! ask/tell [`engine::Engine`].
//!
//! The objective-side math (scalarizer, worst-case aggregation, dominance) is
//! generic over the float type through [`Scalar`]; the aliases below pin the
//! common instantiations.

pub mod config;
pub mod design_space;
pub mod engine;
pub mod error;
pub mod evaluators;
pub mod experiment;
pub mod objectives;
pub mod pareto;
pub mod robust;
pub mod sampling;

use std::fmt::Debug;

pub use config::Config;
pub use design_space::{DesignPoint, DesignSpace, OperatingGrid, ParameterKind, ParameterSpec};
pub use engine::{Engine, EngineConfig, Phase, RunTrace, Trial};
pub use error::{Error, Result};
pub use evaluators::{EvalError, Evaluator, MetricSet};
pub use objectives::{Comparator, Direction};

/// Float type the objective-side math is generic over: `f32` or `f64`.
pub trait Scalar: num_traits::Float + num_traits::FromPrimitive + Debug + Default + Send + Sync + 'static {}

impl<T> Scalar for T where T: num_traits::Float + num_traits::FromPrimitive + Debug + Default + Send + Sync + 'static {}

pub type ObjectiveSpec = objectives::ObjectiveSpec<f64>;
pub type ObjectiveSpecF32 = objectives::ObjectiveSpec<f32>;
pub type ConstraintSpec = objectives::ConstraintSpec<f64>;
pub type ConstraintSpecF32 = objectives::ConstraintSpec<f32>;
pub type ObjectiveVector = objectives::ObjectiveVector<f64>;
pub type ObjectiveVectorF32 = objectives::ObjectiveVector<f32>;
pub type EvaluationRecord = robust::EvaluationRecord<f64>;
pub type EvaluationRecordF32 = robust::EvaluationRecord<f32>;
pub type RobustSummary = robust::RobustSummary<f64>;
pub type RobustSummaryF32 = robust::RobustSummary<f32>;
pub type FrontResult = pareto::FrontResult<f64>;
pub type FrontResultF32 = pareto::FrontResult<f32>;
