//! Seeded multi-run benchmark against the exhaustive optimum.

mod report;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::design_space::{DesignPoint, DesignSpace};
use crate::engine::{run_to_budget, Engine, EngineConfig, RunTrace};
use crate::error::{Error, Result};
use crate::evaluators::{map_ordered, sweep_design, Evaluator, EvaluatorSpec};
use crate::objectives::{scalarize, ConstraintSpec, ObjectiveSpec, ObjectiveVector};
use crate::pareto::pareto_mask;
use crate::robust::{worst_case, RobustSummary};

pub use report::{
    emit_report, parse_summary, parse_traces, read_summary, read_traces, write_front, write_robust, write_summary,
    write_traces, FrontTable,
};

/// Largest grid `exhaustive` will sweep unless told otherwise.
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

/// A design space, an evaluator and the specs that turn its metrics into scores.
#[derive(Clone)]
pub struct Problem {
    pub space: DesignSpace,
    pub evaluator: Arc<dyn Evaluator>,
    pub objectives: Vec<ObjectiveSpec>,
    pub constraints: Vec<ConstraintSpec>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("designs", &self.space.size())
            .field("objectives", &self.objectives)
            .field("constraints", &self.constraints)
            .finish()
    }
}

impl Problem {
    pub fn new(
        space: DesignSpace,
        evaluator: Arc<dyn Evaluator>,
        objectives: Vec<ObjectiveSpec>,
        constraints: Vec<ConstraintSpec>,
    ) -> Self {
        Self { space, evaluator, objectives, constraints }
    }

    pub fn from_config(config: &Config, evaluator: &EvaluatorSpec) -> Result<Self> {
        let space = config.design_space()?;
        let evaluator = evaluator.build(&space, &config.metric_names())?;
        Ok(Self::new(space, evaluator, config.objectives()?, config.constraints()?))
    }

    /// Sweeps `design` over the operating grid and takes the worst case.
    pub fn summarize(&self, design: &DesignPoint) -> Result<RobustSummary> {
        let records = sweep_design(&*self.evaluator, &self.space, design)?;
        worst_case(&records, self.space.operating(), &self.objectives, &self.constraints)
    }

    pub fn worst_case_vector(&self, design: &DesignPoint) -> Result<ObjectiveVector> {
        Ok(self.summarize(design)?.worst_case)
    }

    pub fn score(&self, design: &DesignPoint) -> Result<f64> {
        scalarize(&self.worst_case_vector(design)?, &self.objectives)
    }

    pub fn engine(&self, config: EngineConfig) -> Result<Engine> {
        Engine::new(self.space.clone(), self.objectives.clone(), config)
    }
}

fn check_cap(space: &DesignSpace, cap: usize) -> Result<()> {
    let size = space.size();
    if size > cap {
        Err(Error::GridTooLarge { size, cap })
    } else {
        Ok(())
    }
}

/// Robust summaries of every grid design, in enumeration order.
pub fn exhaustive(problem: &Problem, cap: usize, workers: usize) -> Result<Vec<RobustSummary>> {
    check_cap(&problem.space, cap)?;
    let designs = problem.space.enumerate_grid();
    map_ordered(&designs, workers, |d| problem.summarize(d))
}

/// Lowest score over the grid; `+inf` when no design is feasible.
pub fn optimal_score(problem: &Problem, cap: usize, workers: usize) -> Result<f64> {
    let summaries = exhaustive(problem, cap, workers)?;
    optimal_from(&summaries, &problem.objectives)
}

pub fn optimal_from(summaries: &[RobustSummary], objectives: &[ObjectiveSpec]) -> Result<f64> {
    summaries.iter().try_fold(f64::INFINITY, |best, s| Ok(best.min(scalarize(&s.worst_case, objectives)?)))
}

/// Exhaustive summaries with their Pareto flags, ready for `front.csv`.
pub fn front_table(problem: &Problem, cap: usize, workers: usize) -> Result<FrontTable> {
    let summaries = exhaustive(problem, cap, workers)?;
    let mask = pareto_mask(&summaries, &problem.objectives)?;
    Ok(FrontTable { summaries, pareto: mask.into_iter().map(|m| m == Some(true)).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub trials: usize,
    pub seed_base: u64,
    pub tolerance: f64,
    pub workers: usize,
    pub grid_cap: usize,
    pub engine: EngineConfig,
}

impl ExperimentConfig {
    pub fn new(engine: EngineConfig, runs: usize, trials: usize) -> Self {
        Self { runs, trials, seed_base: engine.seed, tolerance: 0.05, workers: 1, grid_cap: DEFAULT_GRID_CAP, engine }
    }

    /// Same runs and seeds with a pure uniform-random sampler.
    pub fn baseline(&self) -> Self {
        Self { engine: self.engine.uniform_baseline(), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Validation("runs must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Validation(format!("tolerance must be a non-negative number, got {}", self.tolerance)));
        }
        self.engine.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub mean_score_star: f64,
    pub std_score_star: f64,
    pub frac_within_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub optimal_score: f64,
    pub tolerance: f64,
    pub rows: Vec<ExperimentRow>,
    pub traces: Vec<RunTrace>,
}

impl ExperimentReport {
    pub fn row(&self, n: usize) -> Option<&ExperimentRow> {
        n.checked_sub(1).and_then(|i| self.rows.get(i))
    }
}

/// `score <= optimal + tolerance * max(|optimal|, 1)`.
pub fn within_tolerance(score: f64, optimal: f64, tolerance: f64) -> bool {
    score <= optimal + tolerance * optimal.abs().max(1.0)
}

/// Mean and population standard deviation; both `+inf` if any value is infinite.
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.iter().any(|v| v.is_infinite()) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-trial-index statistics over equal-length traces.
pub fn aggregate(traces: &[RunTrace], optimal: f64, tolerance: f64) -> Vec<ExperimentRow> {
    let trials = traces.first().map_or(0, RunTrace::len);
    (0..trials)
        .map(|i| {
            let column: Vec<f64> = traces.iter().map(|t| t.score_star[i]).collect();
            let (mean, std) = mean_std(&column);
            let hits = column.iter().filter(|&&s| within_tolerance(s, optimal, tolerance)).count();
            ExperimentRow {
                n: i + 1,
                mean_score_star: mean,
                std_score_star: std,
                frac_within_tol: hits as f64 / column.len() as f64,
            }
        })
        .collect()
}

/// Runs `config.runs` seeded engines and aggregates them against `optimal`.
///
/// Worst-case vectors are shared between runs, so each design is swept at most once.
pub fn run_with_optimum(problem: &Problem, config: &ExperimentConfig, optimal: f64) -> Result<ExperimentReport> {
    config.validate()?;
    let memo: Mutex<HashMap<usize, ObjectiveVector>> = Mutex::new(HashMap::new());
    let lookup = |design: &DesignPoint| -> Result<ObjectiveVector> {
        let key = problem.space.flat_index(design)?;
        if let Some(v) = memo.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = problem.worst_case_vector(design)?;
        memo.lock().unwrap().insert(key, v.clone());
        Ok(v)
    };
    let runs: Vec<u64> = (0..config.runs as u64).collect();
    let traces = map_ordered(&runs, config.workers, |&r| {
        let seed = config.seed_base.wrapping_add(r);
        let mut engine = problem.engine(config.engine.with_seed(seed))?;
        run_to_budget(&mut engine, &lookup, config.trials).map_err(|e| match e {
            Error::Evaluation { context, source } => {
                Error::Evaluation { context: format!("run {r} (seed {seed}), {context}"), source }
            }
            other => Error::Engine(format!("run {r} (seed {seed}): {other}")),
        })
    })?;
    Ok(ExperimentReport {
        optimal_score: optimal,
        tolerance: config.tolerance,
        rows: aggregate(&traces, optimal, config.tolerance),
        traces,
    })
}

/// Computes the exhaustive optimum, then runs the experiment.
pub fn run_experiment(problem: &Problem, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let optimal = optimal_score(problem, config.grid_cap, config.workers)?;
    run_with_optimum(problem, config, optimal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{OperatingGrid, ParameterKind, ParameterSpec};
    use crate::evaluators::{EvalError, MetricSet};

    struct Bowl;

    impl Evaluator for Bowl {
        fn evaluate(&self, d: &DesignPoint, op: f64) -> Result<MetricSet, EvalError> {
            let f = (d.values[0] - 0.5).powi(2) + (d.values[1] - 0.25).powi(2) + op;
            Ok([("f".to_string(), f), ("c".to_string(), d.values[0])].into_iter().collect())
        }

        fn metric_names(&self) -> Vec<String> {
            vec!["f".into(), "c".into()]
        }
    }

    fn problem(constraint: f64) -> Problem {
        let space = DesignSpace::new(
            vec![
                ParameterSpec::new("x", ParameterKind::GriddedFloat, 0.0, 1.0, 5).unwrap(),
                ParameterSpec::new("y", ParameterKind::GriddedFloat, 0.0, 1.0, 5).unwrap(),
            ],
            OperatingGrid::new("op", vec![0.0, 0.1]).unwrap(),
        )
        .unwrap();
        Problem::new(
            space,
            Arc::new(Bowl),
            vec![ObjectiveSpec::minimize("f", 0.1, 1.0, 1.0)],
            vec![ConstraintSpec::less_than("c", constraint)],
        )
    }

    fn config(runs: usize, trials: usize) -> ExperimentConfig {
        let engine = EngineConfig { n_random: 3, n_min_fit: 6, ..EngineConfig::for_dimension(2) };
        ExperimentConfig::new(engine, runs, trials)
    }

    #[test]
    fn optimum_is_zero_when_target_met() {
        assert_eq!(optimal_score(&problem(2.0), DEFAULT_GRID_CAP, 1).unwrap(), 0.0);
    }

    #[test]
    fn optimum_infinite_when_nothing_feasible() {
        assert_eq!(optimal_score(&problem(-1.0), DEFAULT_GRID_CAP, 1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn cap_is_enforced() {
        let err = optimal_score(&problem(2.0), 10, 1).unwrap_err();
        assert!(matches!(err, Error::GridTooLarge { size: 25, cap: 10 }));
    }

    #[test]
    fn single_run_single_trial() {
        let r = run_experiment(&problem(2.0), &config(1, 1)).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].frac_within_tol == 0.0 || r.rows[0].frac_within_tol == 1.0);
        assert_eq!(r.rows[0].std_score_star, 0.0);
    }

    #[test]
    fn report_invariants_and_determinism() {
        let p = problem(2.0);
        let a = run_experiment(&p, &config(12, 20)).unwrap();
        let mut par = config(12, 20);
        par.workers = 4;
        let b = run_experiment(&p, &par).unwrap();
        assert_eq!(a, b);
        for w in a.rows.windows(2) {
            assert!(w[1].mean_score_star <= w[0].mean_score_star);
            assert!(w[1].frac_within_tol >= w[0].frac_within_tol);
        }
        for t in &a.traces {
            assert!(t.score_star.iter().all(|&s| s >= a.optimal_score));
        }
        // 25 designs, 20 trials with dedupe: most runs reach the optimum
        assert!(a.rows[19].frac_within_tol > 0.5);
    }

    #[test]
    fn tolerance_band() {
        assert!(within_tolerance(0.05, 0.0, 0.05));
        assert!(!within_tolerance(0.050001, 0.0, 0.05));
        assert!(within_tolerance(10.5, 10.0, 0.05));
        assert!(!within_tolerance(10.6, 10.0, 0.05));
        assert!(within_tolerance(f64::INFINITY, f64::INFINITY, 0.05));
    }

    #[test]
    fn aggregate_statistics() {
        let traces = vec![
            RunTrace { score_star: vec![4.0, 2.0] },
            RunTrace { score_star: vec![2.0, 0.0] },
            RunTrace { score_star: vec![f64::INFINITY, 1.0] },
        ];
        let rows = aggregate(&traces, 0.0, 0.05);
        assert_eq!(rows[0].mean_score_star, f64::INFINITY);
        assert_eq!(rows[1].mean_score_star, 1.0);
        assert!((rows[1].std_score_star - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(rows[0].frac_within_tol, 0.0);
        assert!((rows[1].frac_within_tol - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(run_experiment(&problem(2.0), &config(0, 5)).is_err());
        assert!(run_experiment(&problem(2.0), &config(1, 0)).is_err());
    }
}
