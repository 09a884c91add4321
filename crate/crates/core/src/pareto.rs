//! Dominance and first-front extraction over robust summaries.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::objectives::{ObjectiveSpec, ObjectiveVector};
use crate::robust::RobustSummary;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontResult<T = f64> {
    pub optimal: Vec<RobustSummary<T>>,
    pub dominated: Vec<RobustSummary<T>>,
    /// Infeasible inputs, excluded from both sets.
    pub infeasible: usize,
}

/// Objective values in the minimized convention, in spec order.
fn minimized_key<T: Scalar>(v: &ObjectiveVector<T>, specs: &[ObjectiveSpec<T>]) -> Result<Vec<T>> {
    specs.iter().map(|s| v.get(&s.name).map(|x| s.minimized(x))).collect()
}

fn key_dominates<T: Scalar>(a: &[T], b: &[T]) -> bool {
    let mut strictly = false;
    for (&x, &y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strictly |= x < y;
    }
    strictly
}

/// `a` is no worse than `b` in every objective and strictly better in at least one.
pub fn dominates<T: Scalar>(
    a: &ObjectiveVector<T>,
    b: &ObjectiveVector<T>,
    specs: &[ObjectiveSpec<T>],
) -> Result<bool> {
    if a.values.len() != b.values.len() || a.values.keys().ne(b.values.keys()) {
        let names = |v: &ObjectiveVector<T>| v.values.keys().cloned().collect::<Vec<_>>().join(",");
        return Err(Error::NameMismatch(format!("[{}] vs [{}]", names(a), names(b))));
    }
    let (ka, kb) = (minimized_key(a, specs)?, minimized_key(b, specs)?);
    Ok(key_dominates(&ka, &kb))
}

/// Non-dominated flag per summary: `None` for infeasible entries.
///
/// Candidates are visited in lexicographic order of their minimized objective
/// vectors. A dominator always sorts strictly before what it dominates, and a
/// dominated point is always dominated by some front member, so each candidate
/// only needs checking against the front built so far.
pub fn pareto_mask<T: Scalar>(summaries: &[RobustSummary<T>], specs: &[ObjectiveSpec<T>]) -> Result<Vec<Option<bool>>> {
    let mut keys = Vec::with_capacity(summaries.len());
    for s in summaries {
        keys.push(if s.feasible { Some(minimized_key(&s.worst_case, specs)?) } else { None });
    }
    let mut order: Vec<usize> = (0..summaries.len()).filter(|&i| keys[i].is_some()).collect();
    let lex = |a: &Vec<T>, b: &Vec<T>| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    };
    order.sort_by(|&i, &j| lex(keys[i].as_ref().unwrap(), keys[j].as_ref().unwrap()).then(i.cmp(&j)));

    let mut mask: Vec<Option<bool>> = keys.iter().map(|k| k.as_ref().map(|_| false)).collect();
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        let ki = keys[i].as_ref().unwrap();
        if !front.iter().any(|&f| key_dominates(keys[f].as_ref().unwrap(), ki)) {
            front.push(i);
            mask[i] = Some(true);
        }
    }
    Ok(mask)
}

/// Splits feasible summaries into the non-dominated set and the rest, preserving input order.
/// Designs with identical objective vectors are all kept as optimal.
pub fn pareto_front<T: Scalar>(summaries: &[RobustSummary<T>], specs: &[ObjectiveSpec<T>]) -> Result<FrontResult<T>> {
    let mask = pareto_mask(summaries, specs)?;
    let mut out = FrontResult { optimal: Vec::new(), dominated: Vec::new(), infeasible: 0 };
    for (s, m) in summaries.iter().zip(mask) {
        match m {
            Some(true) => out.optimal.push(s.clone()),
            Some(false) => out.dominated.push(s.clone()),
            None => out.infeasible += 1,
        }
    }
    Ok(out)
}
