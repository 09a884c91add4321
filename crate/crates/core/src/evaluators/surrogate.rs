//! Closed-form stand-ins for the device simulator.
//!
//! These carry no device physics. They are shaped so objective magnitudes are
//! plausible for a GaN HEMT power amplifier / low-noise amplifier, the three
//! objectives trade off against each other, and each objective reaches its
//! worst case at a different gate bias.

use crate::design_space::{DesignPoint, DesignSpace};
use crate::error::{Error, Result};

use super::{EvalError, Evaluator, MetricSet};

/// Design-variable names both surrogates read, in argument order.
pub const DESIGN_NAMES: [&str; 5] = ["V_DS", "N_f", "W_f", "GDG", "GSG"];

pub const PA_METRICS: [&str; 5] = ["Pout_avg", "PAE_avg", "Tj_avg", "Gain", "ACPR"];
pub const LNA_METRICS: [&str; 3] = ["fmax", "Gain", "NFmin"];

const TOL: f64 = 1e-9;

fn check_range(name: &str, value: f64, lo: f64, hi: f64) -> Result<(), EvalError> {
    if value.is_finite() && value >= lo - TOL && value <= hi + TOL {
        Ok(())
    } else {
        Err(EvalError::OutOfRange(format!("{name} = {value} outside [{lo}, {hi}]")))
    }
}

fn bump(u: f64) -> f64 {
    1.0 - (2.0 * u - 1.0).powi(2)
}

/// Size term `log2(N_f * W_f / 200)`.
fn size_log(n_f: f64, w_f: f64) -> f64 {
    (n_f * w_f / 200.0).log2()
}

fn check_design(v_ds: f64, n_f: f64, w_f: f64, gdg: f64, gsg: f64) -> Result<(), EvalError> {
    check_range("V_DS", v_ds, 16.0, 28.0)?;
    check_range("N_f", n_f, 2.0, 8.0)?;
    check_range("W_f", w_f, 25.0, 100.0)?;
    check_range("GDG", gdg, 22.0, 52.0)?;
    check_range("GSG", gsg, 33.0, 78.0)
}

/// Power-amplifier surrogate: `Pout_avg` (dBm), `PAE_avg` (%), `Tj_avg` (°C), `Gain` (dB), `ACPR` (dBc).
pub fn pa_metrics(v_ds: f64, n_f: f64, w_f: f64, gdg: f64, gsg: f64, vgs: f64) -> Result<MetricSet, EvalError> {
    check_design(v_ds, n_f, w_f, gdg, gsg)?;
    check_range("V_GS", vgs, -1.8, -1.2)?;
    let area = n_f * w_f;
    let s = size_log(n_f, w_f);
    let v = (v_ds - 16.0) / 12.0;
    let u = (vgs + 1.8) / 0.6;
    let d = (gdg - 22.0) / 30.0;
    let g = (gsg - 33.0) / 45.0;

    let pout = 20.0 + 3.0 * s + 2.5 * v + 1.2 * bump(u) - 0.6 * d - 0.3 * g;
    let pae = 34.0 - 4.0 * s - 6.0 * (v - 0.4).powi(2) - 8.0 * (u - 0.6).powi(2) + 1.5 * d;
    let tj = 40.0 + 2.2 * v_ds + 12.0 * (area / 200.0) + 8.0 * u - 5.0 * d - 2.0 * g;
    let gain = 12.0 - 1.2 * s - 2.0 * (w_f - 25.0) / 75.0 - 1.0 * u;
    let acpr = -34.0 + 2.0 * s + 1.5 * v + 2.0 * u;

    Ok(PA_METRICS.iter().map(|n| n.to_string()).zip([pout, pae, tj, gain, acpr]).collect())
}

/// Low-noise-amplifier surrogate: `fmax` (GHz), `Gain` (dB), `NFmin` (dB).
pub fn lna_metrics(v_ds: f64, n_f: f64, w_f: f64, gdg: f64, gsg: f64, vgs: f64) -> Result<MetricSet, EvalError> {
    check_design(v_ds, n_f, w_f, gdg, gsg)?;
    check_range("V_GS", vgs, -1.6, -1.0)?;
    let s = size_log(n_f, w_f);
    let w = (w_f - 25.0) / 75.0;
    let u = (vgs + 1.6) / 0.6;
    let d = (gdg - 22.0) / 30.0;

    let fmax = 115.0 - 9.0 * s - 6.0 * w + 4.0 * bump(u) - 0.03 * (v_ds - 22.0).powi(2) + 2.0 * d;
    let gain = 0.08 * (fmax - 75.0) - 1.0 * u;
    let nfmin = 0.9 + 0.12 * s + 0.015 * (v_ds - 16.0) + 0.5 * (u - 0.35).powi(2) + 0.15 * w;

    Ok(LNA_METRICS.iter().map(|n| n.to_string()).zip([fmax, gain, nfmin]).collect())
}

/// Positions of the five surrogate inputs inside a design space.
#[derive(Debug, Clone, Copy)]
struct Layout([usize; 5]);

impl Layout {
    fn resolve(space: &DesignSpace) -> Result<Self> {
        let mut idx = [0; 5];
        for (slot, name) in idx.iter_mut().zip(DESIGN_NAMES) {
            *slot = space.parameter_index(name).ok_or_else(|| {
                Error::Validation(format!("surrogate evaluators need a design parameter named `{name}`"))
            })?;
        }
        Ok(Self(idx))
    }

    fn args(&self, design: &DesignPoint) -> Result<[f64; 5], EvalError> {
        let mut out = [0.0; 5];
        for (slot, &i) in out.iter_mut().zip(&self.0) {
            *slot = *design
                .values
                .get(i)
                .ok_or_else(|| EvalError::OutOfRange(format!("design has {} values", design.values.len())))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct PaSurrogate {
    layout: Layout,
}

impl PaSurrogate {
    pub fn new(space: &DesignSpace) -> Result<Self> {
        Ok(Self { layout: Layout::resolve(space)? })
    }
}

impl Evaluator for PaSurrogate {
    fn evaluate(&self, design: &DesignPoint, operating: f64) -> Result<MetricSet, EvalError> {
        let [a, b, c, d, e] = self.layout.args(design)?;
        pa_metrics(a, b, c, d, e, operating)
    }

    fn metric_names(&self) -> Vec<String> {
        PA_METRICS.iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LnaSurrogate {
    layout: Layout,
}

impl LnaSurrogate {
    pub fn new(space: &DesignSpace) -> Result<Self> {
        Ok(Self { layout: Layout::resolve(space)? })
    }
}

impl Evaluator for LnaSurrogate {
    fn evaluate(&self, design: &DesignPoint, operating: f64) -> Result<MetricSet, EvalError> {
        let [a, b, c, d, e] = self.layout.args(design)?;
        lna_metrics(a, b, c, d, e, operating)
    }

    fn metric_names(&self) -> Vec<String> {
        LNA_METRICS.iter().map(|s| s.to_string()).collect()
    }
}
