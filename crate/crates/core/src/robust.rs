//! Per-objective worst case over the operating grid.
//!
//! Each objective (and each constraint metric) takes its own worst case, so
//! different operating values may realize different objectives' worst cases.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::design_space::{DesignPoint, OperatingGrid};
use crate::error::{Error, Result};
use crate::objectives::{ConstraintSpec, ObjectiveSpec, ObjectiveVector};
use crate::Scalar;

/// Metrics of one design at one operating value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord<T = f64> {
    pub design: DesignPoint,
    pub operating_value: f64,
    pub metrics: BTreeMap<String, T>,
}

impl<T: Scalar> EvaluationRecord<T> {
    pub fn new(design: DesignPoint, operating_value: f64, metrics: BTreeMap<String, T>) -> Self {
        Self { design, operating_value, metrics }
    }

    fn metric(&self, name: &str) -> Result<T> {
        self.metrics.get(name).copied().ok_or_else(|| Error::MissingMetric(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSummary<T = f64> {
    pub design: DesignPoint,
    pub worst_case: ObjectiveVector<T>,
    pub constraint_worst: BTreeMap<String, T>,
    pub feasible: bool,
    /// Operating value at which each objective and constraint metric hit its
    /// worst case (first in grid order on ties).
    pub realized_at: BTreeMap<String, f64>,
}

/// Tracks the worst value of one metric and where it occurred.
struct Worst<T> {
    value: T,
    at: f64,
}

fn fold_worst<T: Scalar>(
    ordered: &[&EvaluationRecord<T>],
    name: &str,
    is_worse: impl Fn(T, T) -> bool,
) -> Result<Worst<T>> {
    let mut worst: Option<Worst<T>> = None;
    for r in ordered {
        let v = r.metric(name)?;
        if v.is_nan() {
            return Err(Error::Validation(format!(
                "metric `{name}` is NaN at operating value {} for design {}",
                r.operating_value, r.design
            )));
        }
        match &worst {
            Some(w) if !is_worse(v, w.value) => {}
            _ => worst = Some(Worst { value: v, at: r.operating_value }),
        }
    }
    worst.ok_or_else(|| Error::Coverage("no records".into()))
}

/// Collapses one design's records over the full operating grid to its worst-case summary.
pub fn worst_case<T: Scalar>(
    records: &[EvaluationRecord<T>],
    grid: &OperatingGrid,
    objectives: &[ObjectiveSpec<T>],
    constraints: &[ConstraintSpec<T>],
) -> Result<RobustSummary<T>> {
    let first = records.first().ok_or_else(|| Error::Coverage("no records for design".into()))?;
    let design = &first.design;
    if let Some(other) = records.iter().find(|r| r.design != *design) {
        return Err(Error::Coverage(format!("records mix designs {} and {}", design, other.design)));
    }

    let mut slots: Vec<Option<&EvaluationRecord<T>>> = vec![None; grid.len()];
    for r in records {
        let idx = grid.position(r.operating_value).ok_or_else(|| {
            Error::Coverage(format!(
                "design {design}: operating value {} is not on the `{}` grid",
                r.operating_value,
                grid.name()
            ))
        })?;
        if slots[idx].replace(r).is_some() {
            return Err(Error::Coverage(format!(
                "design {design}: operating value {} appears more than once",
                grid.values()[idx]
            )));
        }
    }
    let missing: Vec<String> =
        slots.iter().zip(grid.values()).filter(|(s, _)| s.is_none()).map(|(_, v)| v.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(format!("design {design}: missing operating values {}", missing.join(", "))));
    }
    let ordered: Vec<&EvaluationRecord<T>> = slots.into_iter().flatten().collect();

    let mut values = BTreeMap::new();
    let mut realized_at = BTreeMap::new();
    for spec in objectives {
        let w = fold_worst(&ordered, &spec.name, |a, b| spec.is_worse(a, b))?;
        values.insert(spec.name.clone(), w.value);
        realized_at.insert(spec.name.clone(), w.at);
    }

    let mut constraint_worst = BTreeMap::new();
    let mut feasible = true;
    for c in constraints {
        let w = fold_worst(&ordered, &c.name, |a, b| c.is_worse(a, b))?;
        feasible &= c.holds(w.value);
        // two-sided bounds on one metric keep the first constraint's worst value
        constraint_worst.entry(c.name.clone()).or_insert(w.value);
        realized_at.entry(c.name.clone()).or_insert(w.at);
    }

    Ok(RobustSummary {
        design: design.clone(),
        worst_case: ObjectiveVector::new(values, feasible),
        constraint_worst,
        feasible,
        realized_at,
    })
}

/// One summary per design group, in input order. Infeasible designs are kept with `feasible = false`.
pub fn robustify_all<T: Scalar>(
    groups: &[Vec<EvaluationRecord<T>>],
    grid: &OperatingGrid,
    objectives: &[ObjectiveSpec<T>],
    constraints: &[ConstraintSpec<T>],
) -> Result<Vec<RobustSummary<T>>> {
    groups
        .iter()
        .enumerate()
        .map(|(i, records)| {
            worst_case(records, grid, objectives, constraints).map_err(|e| match e {
                Error::Coverage(m) => Error::Coverage(format!("design group {i}: {m}")),
                Error::MissingMetric(m) => Error::Validation(format!("design group {i}: missing metric `{m}`")),
                other => other,
            })
        })
        .collect()
}

/// Number of feasible summaries.
pub fn feasible_count<T: Scalar>(summaries: &[RobustSummary<T>]) -> usize {
    summaries.iter().filter(|s| s.feasible).count()
}
