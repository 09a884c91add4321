//! Gridded design variables, the operating-parameter grid, and snapping of
//! continuous sampler output onto the grid.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParameterKind {
    #[serde(rename = "gridded-float", alias = "float")]
    GriddedFloat,
    #[serde(rename = "even-integer", alias = "even_integer")]
    EvenInteger,
}

impl fmt::Display for ParameterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterKind::GriddedFloat => f.write_str("gridded-float"),
            ParameterKind::EvenInteger => f.write_str("even-integer"),
        }
    }
}

/// `count` uniformly spaced values from `min` to `max` inclusive.
fn uniform_points(min: f64, max: f64, count: usize) -> Vec<f64> {
    let last = count - 1;
    (0..count).map(|i| if i == last { max } else { min + (max - min) * i as f64 / last as f64 }).collect()
}

/// Index of `value` in a sorted grid, allowing for float noise from
/// hand-written tables (e.g. `-1.5` against a generated `-1.5000000000000002`).
fn grid_position(values: &[f64], value: f64) -> Option<usize> {
    let span = values.last()? - values.first()?;
    let tol = 1e-9 * (span.abs() + values[0].abs() + 1.0);
    let idx = values.partition_point(|v| *v < value);
    [idx.checked_sub(1), Some(idx)]
        .into_iter()
        .flatten()
        .filter(|&i| i < values.len())
        .find(|&i| (values[i] - value).abs() <= tol)
}

/// One design variable: `count` uniformly spaced values on `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpec {
    name: String,
    kind: ParameterKind,
    min: f64,
    max: f64,
    values: Vec<f64>,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, kind: ParameterKind, min: f64, max: f64, count: usize) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Validation("parameter name must not be empty".into()));
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Validation(format!("parameter `{name}`: min and max must be finite")));
        }
        if min >= max {
            return Err(Error::Validation(format!("parameter `{name}`: min ({min}) must be < max ({max})")));
        }
        if count < 2 {
            return Err(Error::Validation(format!("parameter `{name}`: count must be >= 2, got {count}")));
        }
        let mut values = uniform_points(min, max, count);
        if kind == ParameterKind::EvenInteger {
            for v in values.iter_mut() {
                let r = v.round();
                if (*v - r).abs() > 1e-9 || r.rem_euclid(2.0) != 0.0 {
                    return Err(Error::Validation(format!(
                        "parameter `{name}`: even-integer grid [{min}, {max}] x {count} produces non-even value {v}"
                    )));
                }
                *v = r;
            }
        }
        Ok(Self { name, kind, min, max, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ParameterKind {
        self.kind
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// The generated grid, strictly increasing from `min` to `max`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn position(&self, value: f64) -> Option<usize> {
        grid_position(&self.values, value)
    }

    /// Nearest grid index to the unit coordinate `t`; exact midpoints go up.
    pub fn snap_index(&self, t: f64) -> usize {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        let last = self.count() - 1;
        ((t * last as f64 + 0.5).floor() as usize).min(last)
    }

    pub fn unit_coord(&self, index: usize) -> f64 {
        index as f64 / (self.count() - 1) as f64
    }
}

/// Values of the operating parameter the worst case is taken over.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingGrid {
    name: String,
    values: Vec<f64>,
}

impl OperatingGrid {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Validation("operating parameter name must not be empty".into()));
        }
        if values.is_empty() {
            return Err(Error::Validation(format!("operating grid `{name}` is empty")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("operating grid `{name}` has non-finite values")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!("operating grid `{name}` must be strictly increasing")));
        }
        Ok(Self { name, values })
    }

    pub fn from_range(name: impl Into<String>, min: f64, max: f64, count: usize) -> Result<Self> {
        let name = name.into();
        if min.partial_cmp(&max) != Some(Ordering::Less) || count < 2 {
            return Err(Error::Validation(format!(
                "operating grid `{name}`: need min < max and count >= 2 (got [{min}, {max}] x {count})"
            )));
        }
        Self::new(name, uniform_points(min, max, count))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, value: f64) -> Option<usize> {
        grid_position(&self.values, value)
    }
}

/// One assignment of every design variable, aligned with [`DesignSpace::parameters`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub values: Vec<f64>,
}

impl DesignPoint {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }
}

impl fmt::Display for DesignPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    parameters: Vec<ParameterSpec>,
    operating: OperatingGrid,
}

impl DesignSpace {
    pub fn new(parameters: Vec<ParameterSpec>, operating: OperatingGrid) -> Result<Self> {
        if parameters.is_empty() {
            return Err(Error::Validation("design space needs at least one parameter".into()));
        }
        let mut seen = HashSet::new();
        for p in &parameters {
            if !seen.insert(p.name()) {
                return Err(Error::Validation(format!("duplicate parameter name `{}`", p.name())));
            }
        }
        if seen.contains(operating.name()) {
            return Err(Error::Validation(format!(
                "operating parameter `{}` clashes with a design parameter",
                operating.name()
            )));
        }
        Ok(Self { parameters, operating })
    }

    pub fn parameters(&self) -> &[ParameterSpec] {
        &self.parameters
    }

    pub fn operating(&self) -> &OperatingGrid {
        &self.operating
    }

    pub fn dimension(&self) -> usize {
        self.parameters.len()
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name() == name)
    }

    /// Number of designs in the grid, saturating at `usize::MAX`.
    pub fn size(&self) -> usize {
        self.parameters.iter().try_fold(1usize, |acc, p| acc.checked_mul(p.count())).unwrap_or(usize::MAX)
    }

    /// Number of (design, operating value) evaluation keys.
    pub fn evaluation_keys(&self) -> usize {
        self.size().saturating_mul(self.operating.len())
    }

    /// The full Cartesian product, first-declared parameter varying slowest.
    pub fn enumerate_grid(&self) -> Vec<DesignPoint> {
        (0..self.size()).map(|i| self.point_at(i)).collect()
    }

    /// Design at position `flat` of [`enumerate_grid`](Self::enumerate_grid).
    pub fn point_at(&self, flat: usize) -> DesignPoint {
        let mut rem = flat;
        let mut values = vec![0.0; self.dimension()];
        for (slot, p) in values.iter_mut().zip(&self.parameters).rev() {
            *slot = p.values()[rem % p.count()];
            rem /= p.count();
        }
        DesignPoint { values }
    }

    fn point_from_indices(&self, indices: &[usize]) -> DesignPoint {
        DesignPoint { values: indices.iter().zip(&self.parameters).map(|(&i, p)| p.values()[i]).collect() }
    }

    pub fn indices_of(&self, point: &DesignPoint) -> Result<Vec<usize>> {
        if point.values.len() != self.dimension() {
            return Err(Error::Dimension { expected: self.dimension(), got: point.values.len() });
        }
        point
            .values
            .iter()
            .zip(&self.parameters)
            .map(|(&v, p)| {
                p.position(v).ok_or_else(|| {
                    Error::Validation(format!("value {v} is not on the grid of parameter `{}`", p.name()))
                })
            })
            .collect()
    }

    pub fn flat_index(&self, point: &DesignPoint) -> Result<usize> {
        let indices = self.indices_of(point)?;
        Ok(indices.iter().zip(&self.parameters).fold(0, |acc, (&i, p)| acc * p.count() + i))
    }

    /// Checks every coordinate is a member of its parameter's grid.
    pub fn validate_point(&self, point: &DesignPoint) -> Result<()> {
        self.indices_of(point).map(|_| ())
    }

    /// Position of each coordinate within its grid, scaled to `[0, 1]`.
    pub fn unit_coords(&self, point: &DesignPoint) -> Result<Vec<f64>> {
        let indices = self.indices_of(point)?;
        Ok(indices.iter().zip(&self.parameters).map(|(&i, p)| p.unit_coord(i)).collect())
    }

    /// Maps a unit-cube vector to the nearest grid design. Coordinates are clamped to `[0, 1]`.
    pub fn snap(&self, unit: &[f64]) -> Result<DesignPoint> {
        if unit.len() != self.dimension() {
            return Err(Error::Dimension { expected: self.dimension(), got: unit.len() });
        }
        let indices: Vec<usize> = unit.iter().zip(&self.parameters).map(|(&t, p)| p.snap_index(t)).collect();
        Ok(self.point_from_indices(&indices))
    }

    pub fn snap_flat(&self, unit: &[f64]) -> Result<usize> {
        if unit.len() != self.dimension() {
            return Err(Error::Dimension { expected: self.dimension(), got: unit.len() });
        }
        Ok(unit.iter().zip(&self.parameters).fold(0, |acc, (&t, p)| acc * p.count() + p.snap_index(t)))
    }
}

/// Parses the `parameters` and `operating` sections of a config document.
pub fn parse_space(config_text: &str) -> Result<DesignSpace> {
    crate::config::Config::parse(config_text)?.design_space()
}
