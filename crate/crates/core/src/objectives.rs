//! Objective and constraint declarations, and the separable target/priority/limit
//! scalarizer.
//!
//! Each objective contributes a penalty that is zero on the target side, grows
//! linearly with slope `priority / |limit - target|` between target and limit,
//! and is `+inf` past the limit. The score is the sum of the penalties, or
//! `+inf` for an infeasible design.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Minimize => f.write_str("minimize"),
            Direction::Maximize => f.write_str("maximize"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec<T = f64> {
    pub name: String,
    pub direction: Direction,
    pub target: T,
    pub limit: T,
    pub priority: T,
}

impl<T: Scalar> ObjectiveSpec<T> {
    pub fn new(name: impl Into<String>, direction: Direction, target: T, limit: T, priority: T) -> Self {
        Self { name: name.into(), direction, target, limit, priority }
    }

    pub fn minimize(name: impl Into<String>, target: T, limit: T, priority: T) -> Self {
        Self::new(name, Direction::Minimize, target, limit, priority)
    }

    pub fn maximize(name: impl Into<String>, target: T, limit: T, priority: T) -> Self {
        Self::new(name, Direction::Maximize, target, limit, priority)
    }

    /// The value in the minimized convention: maximize objectives are negated.
    pub fn minimized(&self, value: T) -> T {
        match self.direction {
            Direction::Minimize => value,
            Direction::Maximize => -value,
        }
    }

    /// Is `a` strictly worse than `b` for this objective.
    pub fn is_worse(&self, a: T, b: T) -> bool {
        self.minimized(a) > self.minimized(b)
    }

    /// The same objective restated as a minimization over negated values.
    pub fn negated(&self) -> Self {
        let direction = match self.direction {
            Direction::Minimize => Direction::Maximize,
            Direction::Maximize => Direction::Minimize,
        };
        Self::new(self.name.clone(), direction, -self.target, -self.limit, self.priority)
    }

    pub fn penalty(&self, value: T) -> T {
        phi_component(value, self)
    }
}

/// Penalty for one objective value. `NaN` is treated as past the limit.
pub fn phi_component<T: Scalar>(value: T, spec: &ObjectiveSpec<T>) -> T {
    let (t, l, p) = (spec.target, spec.limit, spec.priority);
    match spec.direction {
        Direction::Minimize => {
            if value <= t {
                T::zero()
            } else if value <= l {
                p * (value - t) / (l - t)
            } else {
                T::infinity()
            }
        }
        Direction::Maximize => {
            if value >= t {
                T::zero()
            } else if value >= l {
                p * (t - value) / (t - l)
            } else {
                T::infinity()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "lt")]
    LessThan,
    #[serde(rename = "gt")]
    GreaterThan,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Comparator::LessThan => f.write_str("<"),
            Comparator::GreaterThan => f.write_str(">"),
        }
    }
}

/// Strict feasibility threshold on one metric, e.g. `ACPR < -30`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec<T = f64> {
    pub name: String,
    pub comparator: Comparator,
    pub threshold: T,
}

impl<T: Scalar> ConstraintSpec<T> {
    pub fn less_than(name: impl Into<String>, threshold: T) -> Self {
        Self { name: name.into(), comparator: Comparator::LessThan, threshold }
    }

    pub fn greater_than(name: impl Into<String>, threshold: T) -> Self {
        Self { name: name.into(), comparator: Comparator::GreaterThan, threshold }
    }

    pub fn holds(&self, value: T) -> bool {
        match self.comparator {
            Comparator::LessThan => value < self.threshold,
            Comparator::GreaterThan => value > self.threshold,
        }
    }

    /// Is `a` strictly closer to violating this constraint than `b`.
    pub fn is_worse(&self, a: T, b: T) -> bool {
        match self.comparator {
            Comparator::LessThan => a > b,
            Comparator::GreaterThan => a < b,
        }
    }
}

/// Worst-case objective values of one design plus its feasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector<T = f64> {
    pub values: BTreeMap<String, T>,
    pub feasible: bool,
}

impl<T: Scalar> ObjectiveVector<T> {
    pub fn new(values: BTreeMap<String, T>, feasible: bool) -> Self {
        Self { values, feasible }
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, T)>, feasible: bool) -> Self {
        Self { values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(), feasible }
    }

    pub fn get(&self, name: &str) -> Result<T> {
        self.values.get(name).copied().ok_or_else(|| Error::MissingMetric(name.to_string()))
    }
}

/// Sum of per-objective penalties; `+inf` when the vector is infeasible.
pub fn scalarize<T: Scalar>(vector: &ObjectiveVector<T>, specs: &[ObjectiveSpec<T>]) -> Result<T> {
    let values = specs.iter().map(|s| vector.get(&s.name)).collect::<Result<Vec<T>>>()?;
    if !vector.feasible {
        return Ok(T::infinity());
    }
    Ok(values.into_iter().zip(specs).fold(T::zero(), |acc, (v, s)| acc + phi_component(v, s)))
}

/// Checks target/limit ordering, positive finite priorities and unique names.
/// Every violation is reported, one per line.
pub fn validate_specs<T: Scalar>(specs: &[ObjectiveSpec<T>]) -> Result<()> {
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    for s in specs {
        if s.name.is_empty() {
            problems.push("objective with empty name".to_string());
        }
        if !seen.insert(s.name.as_str()) {
            problems.push(format!("`{}`: duplicate objective name", s.name));
        }
        if !(s.target.is_finite() && s.limit.is_finite()) {
            problems.push(format!("`{}`: target and limit must be finite", s.name));
        }
        if !(s.priority > T::zero() && s.priority.is_finite()) {
            problems.push(format!("`{}`: priority must be > 0 (got {:?})", s.name, s.priority));
        }
        match s.direction {
            Direction::Minimize if s.target.partial_cmp(&s.limit).is_none_or(|o| o == Ordering::Greater) => {
                problems.push(format!("`{}`: minimize requires target <= limit", s.name))
            }
            Direction::Maximize if s.limit.partial_cmp(&s.target).is_none_or(|o| o == Ordering::Greater) => {
                problems.push(format!("`{}`: maximize requires limit <= target", s.name))
            }
            _ => {}
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems.join("\n")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table5a() -> Vec<ObjectiveSpec> {
        vec![
            ObjectiveSpec::maximize("Pout_avg", 28.0, 8.0, 1.0),
            ObjectiveSpec::maximize("PAE_avg", 17.0, 5.0, 1.0),
            ObjectiveSpec::minimize("Tj_avg", 125.0, 150.0, 1.0),
        ]
    }

    fn vector(p: f64, e: f64, t: f64, feasible: bool) -> ObjectiveVector {
        ObjectiveVector::from_pairs([("Pout_avg", p), ("PAE_avg", e), ("Tj_avg", t)], feasible)
    }

    #[test]
    fn phi_examples() {
        let tj = ObjectiveSpec::minimize("Tj_avg", 125.0, 150.0, 1.0);
        assert_eq!(phi_component(125.0, &tj), 0.0);
        assert_eq!(phi_component(137.5, &tj), 0.5);
        assert_eq!(phi_component(150.0, &tj), 1.0);
        assert_eq!(phi_component(150.000001, &tj), f64::INFINITY);
        let pout = ObjectiveSpec::maximize("Pout_avg", 28.0, 8.0, 1.0);
        assert_eq!(phi_component(7.0, &pout), f64::INFINITY);
        // 2 * (17 - 11) / (17 - 5)
        let pae = ObjectiveSpec::maximize("PAE_avg", 17.0, 5.0, 2.0);
        assert_eq!(phi_component(11.0, &pae), 1.0);
        assert_eq!(phi_component(f64::NAN, &pae), f64::INFINITY);
    }

    #[test]
    fn target_equal_to_limit_is_a_step() {
        let s = ObjectiveSpec::minimize("x", 1.0, 1.0, 3.0);
        assert_eq!(phi_component(1.0, &s), 0.0);
        assert_eq!(phi_component(1.5, &s), f64::INFINITY);
    }

    #[test]
    fn scalarize_examples() {
        let specs = table5a();
        assert_eq!(scalarize(&vector(28.0, 17.0, 125.0, true), &specs).unwrap(), 0.0);
        assert_eq!(scalarize(&vector(18.0, 11.0, 137.5, true), &specs).unwrap(), 1.5);
        assert_eq!(scalarize(&vector(28.0, 17.0, 125.0, false), &specs).unwrap(), f64::INFINITY);
        assert_eq!(scalarize(&vector(7.0, 17.0, 125.0, true), &specs).unwrap(), f64::INFINITY);
    }

    #[test]
    fn scalarize_missing_metric() {
        let v = ObjectiveVector::from_pairs([("Pout_avg", 1.0)], true);
        assert!(matches!(scalarize(&v, &table5a()), Err(Error::MissingMetric(n)) if n == "PAE_avg"));
    }

    #[test]
    fn validate_examples() {
        assert!(validate_specs(&[ObjectiveSpec::minimize("Tj", 125.0, 150.0, 1.0)]).is_ok());
        assert!(validate_specs(&[ObjectiveSpec::minimize("Tj", 150.0, 125.0, 1.0)]).is_err());
        assert!(validate_specs(&[ObjectiveSpec::minimize("Tj", 125.0, 150.0, 0.0)]).is_err());
        assert!(validate_specs(&[ObjectiveSpec::maximize("P", 8.0, 28.0, 1.0)]).is_err());
        assert!(validate_specs(&table5a()).is_ok());
        let dup = [ObjectiveSpec::minimize("a", 0.0, 1.0, 1.0), ObjectiveSpec::minimize("a", 0.0, 1.0, 1.0)];
        assert!(validate_specs(&dup).is_err());
    }

    #[test]
    fn validate_reports_every_violation() {
        let bad = [ObjectiveSpec::minimize("a", 2.0, 1.0, 1.0), ObjectiveSpec::maximize("b", 1.0, 2.0, -1.0)];
        let Err(Error::Validation(msg)) = validate_specs(&bad) else { panic!() };
        assert_eq!(msg.lines().count(), 3, "{msg}");
        assert!(msg.contains("`a`") && msg.contains("`b`"));
    }

    #[test]
    fn works_for_f32() {
        let s: ObjectiveSpec<f32> = ObjectiveSpec::maximize("g", 3.0, 0.5, 1.0);
        assert_eq!(phi_component(1.75f32, &s), 0.5);
        let v = ObjectiveVector::from_pairs([("g", 1.75f32)], true);
        assert_eq!(scalarize(&v, &[s]).unwrap(), 0.5f32);
    }

    #[test]
    fn constraints_are_strict() {
        let acpr = ConstraintSpec::less_than("ACPR", -30.0);
        assert!(acpr.holds(-30.5));
        assert!(!acpr.holds(-30.0));
        let gain = ConstraintSpec::greater_than("Gain", 7.0);
        assert!(gain.holds(7.5));
        assert!(!gain.holds(7.0));
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"name":"Tj_avg","direction":"minimize","target":125,"limit":150,"priority":1}"#;
        let s: ObjectiveSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s, ObjectiveSpec::minimize("Tj_avg", 125.0, 150.0, 1.0));
        let c: ConstraintSpec = serde_json::from_str(r#"{"name":"ACPR","comparator":"lt","threshold":-30}"#).unwrap();
        assert_eq!(c, ConstraintSpec::less_than("ACPR", -30.0));
    }

    fn arb_spec() -> impl Strategy<Value = ObjectiveSpec> {
        (any::<bool>(), -100.0f64..100.0, 0.0f64..50.0, 0.01f64..10.0).prop_map(|(max, t, gap, p)| {
            if max {
                ObjectiveSpec::maximize("m", t, t - gap, p)
            } else {
                ObjectiveSpec::minimize("m", t, t + gap, p)
            }
        })
    }

    proptest! {
        #[test]
        fn phi_nonnegative_and_zero_on_target_side(s in arb_spec(), v in -200.0f64..200.0) {
            let out = phi_component(v, &s);
            prop_assert!(out >= 0.0);
            if !s.is_worse(v, s.target) {
                prop_assert_eq!(out, 0.0);
            }
        }

        #[test]
        fn phi_monotone_in_unfavorable_direction(s in arb_spec(), a in -200.0f64..200.0, b in -200.0f64..200.0) {
            let (better, worse) = if s.is_worse(a, b) { (b, a) } else { (a, b) };
            prop_assert!(phi_component(better, &s) <= phi_component(worse, &s));
        }

        #[test]
        fn priority_homogeneity(s in arb_spec(), v in -200.0f64..200.0, c in 0.1f64..10.0) {
            let mut scaled = s.clone();
            scaled.priority = s.priority * c;
            let (base, out) = (phi_component(v, &s), phi_component(v, &scaled));
            if base == 0.0 || base.is_infinite() {
                prop_assert_eq!(base, out);
            } else {
                prop_assert!((out - c * base).abs() <= 1e-12 * out.abs().max(1.0));
            }
        }

        #[test]
        fn negation_convention_is_exact(s in arb_spec(), v in -200.0f64..200.0) {
            let flipped = s.negated();
            prop_assert_eq!(phi_component(v, &s).to_bits(), phi_component(-v, &flipped).to_bits());
        }

        #[test]
        fn scalarize_is_separable(specs in prop::collection::vec(arb_spec(), 1..6), vals in prop::collection::vec(-200.0f64..200.0, 6)) {
            let specs: Vec<ObjectiveSpec> = specs
                .into_iter()
                .enumerate()
                .map(|(i, mut s)| { s.name = format!("m{i}"); s })
                .collect();
            let v = ObjectiveVector::from_pairs(specs.iter().zip(&vals).map(|(s, &x)| (s.name.clone(), x)), true);
            let mut expected = 0.0;
            for (s, &x) in specs.iter().zip(&vals) {
                expected += phi_component(x, s);
            }
            prop_assert_eq!(scalarize(&v, &specs).unwrap(), expected);
        }
    }
}
