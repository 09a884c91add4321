//! JSON config schema shared by every workflow.
//!
//! ```json
//! {
//!   "parameters": [{"name": "V_DS", "kind": "gridded-float", "min": 16, "max": 28, "count": 4}],
//!   "operating": {"name": "V_GS", "min": -1.8, "max": -1.2, "count": 7},
//!   "objectives": [{"name": "Tj_avg", "direction": "minimize", "target": 125, "limit": 150, "priority": 1}],
//!   "constraints": [{"name": "ACPR", "comparator": "lt", "threshold": -30}],
//!   "engine": {"seed": 7, "dedupe": true}
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design_space::{DesignSpace, OperatingGrid, ParameterKind, ParameterSpec};
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::objectives::{validate_specs, ConstraintSpec, ObjectiveSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterConfig {
    pub name: String,
    pub kind: ParameterKind,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Either an explicit `values` list or a `{min, max, count}` range.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

/// Engine knobs; anything left out falls back to the dimension-dependent defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_random: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min_fit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elite_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmm_components: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedupe: Option<bool>,
}

impl EngineSection {
    pub fn resolve(&self, dimension: usize) -> Result<EngineConfig> {
        let defaults = EngineConfig::for_dimension(dimension);
        let n_random = self.n_random.unwrap_or(defaults.n_random);
        let cfg = EngineConfig {
            n_random,
            n_min_fit: self.n_min_fit.unwrap_or(defaults.n_min_fit.max(n_random)),
            elite_fraction: self.elite_fraction.unwrap_or(defaults.elite_fraction),
            gmm_components: self.gmm_components.unwrap_or(defaults.gmm_components),
            explore_prob: self.explore_prob.unwrap_or(defaults.explore_prob),
            seed: self.seed.unwrap_or(defaults.seed),
            dedupe: self.dedupe.unwrap_or(defaults.dedupe),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub parameters: Vec<ParameterConfig>,
    pub operating: OperatingConfig,
    #[serde(default)]
    pub objectives: Vec<ObjectiveSpec<f64>>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec<f64>>,
    #[serde(default)]
    pub engine: EngineSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::Parse { field, message: e.into_inner().to_string() }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn design_space(&self) -> Result<DesignSpace> {
        let params = self
            .parameters
            .iter()
            .map(|p| ParameterSpec::new(p.name.clone(), p.kind, p.min, p.max, p.count))
            .collect::<Result<Vec<_>>>()?;
        let op = &self.operating;
        let grid = match (&op.values, op.min, op.max, op.count) {
            (Some(values), None, None, None) => OperatingGrid::new(op.name.clone(), values.clone())?,
            (None, Some(min), Some(max), Some(count)) => OperatingGrid::from_range(op.name.clone(), min, max, count)?,
            _ => {
                return Err(Error::Parse {
                    field: "operating".into(),
                    message: "expected either `values` or all of `min`, `max`, `count`".into(),
                })
            }
        };
        DesignSpace::new(params, grid)
    }

    /// Objective specs after validation.
    pub fn objectives(&self) -> Result<Vec<ObjectiveSpec<f64>>> {
        validate_specs(&self.objectives)?;
        Ok(self.objectives.clone())
    }

    pub fn constraints(&self) -> Result<Vec<ConstraintSpec<f64>>> {
        for c in &self.constraints {
            if !c.threshold.is_finite() {
                return Err(Error::Validation(format!("constraint `{}`: threshold must be finite", c.name)));
            }
        }
        Ok(self.constraints.clone())
    }

    pub fn engine_config(&self) -> Result<EngineConfig> {
        self.engine.resolve(self.parameters.len())
    }

    /// Metric names the evaluator must produce: objectives first, then constraint metrics.
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for n in self.objectives.iter().map(|o| &o.name).chain(self.constraints.iter().map(|c| &c.name)) {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PA: &str = r#"{
        "parameters": [
            {"name": "V_DS", "kind": "gridded-float", "min": 16, "max": 28, "count": 4},
            {"name": "N_f", "kind": "even-integer", "min": 2, "max": 8, "count": 4},
            {"name": "W_f", "kind": "gridded-float", "min": 25, "max": 100, "count": 7},
            {"name": "GDG", "kind": "gridded-float", "min": 22, "max": 52, "count": 2},
            {"name": "GSG", "kind": "gridded-float", "min": 33, "max": 78, "count": 3}
        ],
        "operating": {"name": "V_GS", "min": -1.8, "max": -1.2, "count": 7}
    }"#;

    #[test]
    fn parses_pa_table() {
        let space = crate::design_space::parse_space(PA).unwrap();
        let counts: Vec<usize> = space.parameters().iter().map(|p| p.count()).collect();
        assert_eq!(counts, vec![4, 4, 7, 2, 3]);
        assert_eq!(space.size(), 672);
        assert_eq!(space.operating().len(), 7);
    }

    #[test]
    fn count_one_is_a_validation_error() {
        let text = PA.replace(r#""max": 52, "count": 2"#, r#""max": 52, "count": 1"#);
        assert!(matches!(crate::design_space::parse_space(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn odd_even_integer_rejected() {
        let text = PA.replace(r#""min": 2, "max": 8"#, r#""min": 3, "max": 9"#);
        assert!(matches!(crate::design_space::parse_space(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_key_names_field() {
        let text = PA.replace(r#""max": -1.2, "count": 7}"#, r#""max": -1.2, "count": 7, "step": 0.1}"#);
        match Config::parse(&text) {
            Err(Error::Parse { field, message }) => {
                assert!(field.starts_with("operating"), "{field}");
                assert!(message.contains("step"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_type_names_field() {
        let text = PA.replace(r#""count": 3}"#, r#""count": "three"}"#);
        match Config::parse(&text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "parameters[4].count"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn operating_values_form() {
        let text = PA.replace(
            r#"{"name": "V_GS", "min": -1.8, "max": -1.2, "count": 7}"#,
            r#"{"name": "V_GS", "values": [-1.8, -1.5, -1.2]}"#,
        );
        let space = crate::design_space::parse_space(&text).unwrap();
        assert_eq!(space.operating().values(), &[-1.8, -1.5, -1.2]);

        let mixed = PA.replace(r#""max": -1.2, "count": 7}"#, r#""max": -1.2, "count": 7, "values": [1]}"#);
        assert!(matches!(Config::parse(&mixed).unwrap().design_space(), Err(Error::Parse { .. })));
    }

    #[test]
    fn engine_defaults_follow_dimension() {
        let cfg = Config::parse(PA).unwrap().engine_config().unwrap();
        assert_eq!(cfg.n_random, 10);
        assert_eq!(cfg.n_min_fit, 25);
        assert_eq!(cfg.elite_fraction, 0.25);
    }
}
