use std::path::Path;

use ats_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::flu::FluExperiment;
use crate::mallard::MallardExperiment;
use crate::radius::RadiusExperiment;
use crate::regret::RegretExperiment;

/// Any experiment, selected by its `experiment` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Flu(FluExperiment),
    Mallard(MallardExperiment),
    RegretCurve(RegretExperiment),
    Radius(RadiusExperiment),
}

/// Writes `patch` over `base`, recursing into objects; anything else replaces.
fn overlay(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                overlay(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn parse_over<T: DeserializeOwned>(mut base: Value, text: &str) -> Result<T> {
    let patch: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    overlay(&mut base, patch);
    serde_json::from_value(base).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses `text` with every missing field, at any depth, taken from `T::default()`.
pub fn with_defaults<T: Default + Serialize + DeserializeOwned>(text: &str) -> Result<T> {
    parse_over(serde_json::to_value(T::default()).map_err(|e| Error::Parse(e.to_string()))?, text)
}

impl ExperimentConfig {
    /// Default settings of the named experiment.
    pub fn defaults(name: &str) -> Option<Self> {
        Some(match name {
            "flu" => ExperimentConfig::Flu(FluExperiment::default()),
            "mallard" => ExperimentConfig::Mallard(MallardExperiment::default()),
            "regret-curve" => ExperimentConfig::RegretCurve(RegretExperiment::default()),
            "radius" => ExperimentConfig::Radius(RadiusExperiment::default()),
            _ => return None,
        })
    }

    /// Missing fields, nested ones included, take that experiment's defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let base = raw
            .get("experiment")
            .and_then(Value::as_str)
            .and_then(Self::defaults)
            .map(|d| serde_json::to_value(d).expect("configs always serialize"))
            .unwrap_or(Value::Null);
        let cfg: Self = parse_over(base, text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Flu(e) => e.validate(),
            ExperimentConfig::Mallard(e) => e.validate(),
            ExperimentConfig::RegretCurve(e) => e.validate(),
            ExperimentConfig::Radius(e) => e.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Flu(_) => "flu",
            ExperimentConfig::Mallard(_) => "mallard",
            ExperimentConfig::RegretCurve(_) => "regret-curve",
            ExperimentConfig::Radius(_) => "radius",
        }
    }
}
