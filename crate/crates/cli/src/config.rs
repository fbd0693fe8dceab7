//! Experiment configuration files.
//!
//! A config is a flat TOML document:
//!
//! ```toml
//! kind = "balance-check"
//! seed = 7
//!
//! [grid]
//! n = 6
//! b = [-1.0, 0.0, 1.0]
//! gamma = [0.5, 0.75, 1.0]
//!
//! [samples]
//! replicates = 1
//!
//! [tolerance]
//! residual = 1e-12
//! ```
//!
//! Every value is a number or an array of numbers; arrays span the grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::LabError;
use crate::kinds::Kind;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: String,
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    grid: BTreeMap<String, toml::Value>,
    #[serde(default)]
    samples: BTreeMap<String, toml::Value>,
    #[serde(default)]
    tolerance: BTreeMap<String, toml::Value>,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Experiment that produces the records. For `kind = "sweep"` this is the target.
    pub kind: Kind,
    pub sweep: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Axis values in key order; the grid is their cartesian product.
    pub grid: BTreeMap<String, Vec<f64>>,
    pub samples: BTreeMap<String, f64>,
    pub tolerance: BTreeMap<String, f64>,
}

fn number(section: &str, key: &str, v: &toml::Value) -> Result<f64, LabError> {
    match v {
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::Float(f) => Ok(*f),
        other => Err(LabError::Config(format!(
            "[{section}] {key}: expected a number, found {}",
            other.type_str()
        ))),
    }
}

fn numbers(section: &str, key: &str, v: &toml::Value) -> Result<Vec<f64>, LabError> {
    match v {
        toml::Value::Array(items) => items.iter().map(|x| number(section, key, x)).collect(),
        other => Ok(vec![number(section, key, other)?]),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        let named: Kind = raw.kind.parse()?;
        let (kind, sweep) = if named == Kind::Sweep {
            let target = raw.target.ok_or_else(|| {
                LabError::Config("a sweep needs `target = \"<experiment>\"`".into())
            })?;
            (target.parse()?, true)
        } else {
            if raw.target.is_some() {
                return Err(LabError::Config(
                    "`target` is only meaningful for kind = \"sweep\"".into(),
                ));
            }
            (named, false)
        };
        if kind == Kind::Sweep {
            return Err(LabError::Config(
                "a sweep cannot target another sweep".into(),
            ));
        }
        let spec = kind.spec();

        let mut grid = BTreeMap::new();
        for (key, value) in &raw.grid {
            if !spec.grid.iter().any(|p| p.name == key) {
                return Err(LabError::Config(format!(
                    "{kind}: unknown grid parameter `{key}`"
                )));
            }
            let values = numbers("grid", key, value)?;
            if values.is_empty() {
                return Err(LabError::Config(format!("grid axis `{key}` is empty")));
            }
            grid.insert(key.clone(), values);
        }
        for p in &spec.grid {
            if !grid.contains_key(p.name) {
                match p.default {
                    Some(d) => {
                        grid.insert(p.name.to_string(), vec![d]);
                    }
                    None => {
                        return Err(LabError::Config(format!(
                            "{kind}: grid parameter `{}` is required",
                            p.name
                        )))
                    }
                }
            }
        }

        let mut samples = BTreeMap::new();
        for (key, value) in &raw.samples {
            if key != "replicates" && !spec.samples.iter().any(|p| p.name == key) {
                return Err(LabError::Config(format!(
                    "{kind}: unknown sample setting `{key}`"
                )));
            }
            samples.insert(key.clone(), number("samples", key, value)?);
        }
        for p in &spec.samples {
            samples
                .entry(p.name.to_string())
                .or_insert(p.default.expect("sample settings have defaults"));
        }
        let replicates = *samples.entry("replicates".into()).or_insert(1.0);
        if replicates < 1.0 || replicates.fract() != 0.0 {
            return Err(LabError::Config(
                "`replicates` must be a positive integer".into(),
            ));
        }

        let mut tolerance = BTreeMap::new();
        for (key, value) in &raw.tolerance {
            if !spec.tolerance.iter().any(|p| p.name == key) {
                return Err(LabError::Config(format!(
                    "{kind}: unknown tolerance `{key}`"
                )));
            }
            tolerance.insert(key.clone(), number("tolerance", key, value)?);
        }
        for p in &spec.tolerance {
            tolerance
                .entry(p.name.to_string())
                .or_insert(p.default.expect("tolerances have defaults"));
        }

        let config = ExperimentConfig {
            kind,
            sweep,
            seed: raw.seed.unwrap_or(0),
            out: raw.out,
            grid,
            samples,
            tolerance,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), LabError> {
        let spec = self.kind.spec();
        for p in spec.grid.iter().chain(&spec.samples) {
            let values: Vec<f64> = match self.grid.get(p.name) {
                Some(v) => v.clone(),
                None => self
                    .samples
                    .get(p.name)
                    .map(|&v| vec![v])
                    .unwrap_or_default(),
            };
            for v in values {
                if p.integer && (v.fract() != 0.0 || v < 0.0) {
                    return Err(LabError::Config(format!(
                        "`{}` must be a non-negative integer, got {v}",
                        p.name
                    )));
                }
            }
        }
        if let (Some(max), Some(ns)) = (spec.max_n, self.grid.get("n")) {
            if let Some(&n) = ns.iter().find(|&&n| n > max as f64) {
                return Err(LabError::Capacity {
                    kind: self.kind,
                    n: n as usize,
                    max,
                });
            }
        }
        Ok(())
    }

    /// Grid points in lexicographic key order, the last key varying fastest.
    pub fn points(&self) -> Vec<BTreeMap<String, f64>> {
        let mut points = vec![BTreeMap::new()];
        for (key, values) in &self.grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.insert(key.clone(), v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn replicates(&self) -> usize {
        self.samples["replicates"] as usize
    }

    /// The configuration as echoed into every record.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": if self.sweep { "sweep" } else { self.kind.name() },
            "target": if self.sweep { Some(self.kind.name()) } else { None },
            "seed": self.seed,
            "grid": self.grid,
            "samples": self.samples,
            "tolerance": self.tolerance,
        })
    }
}
