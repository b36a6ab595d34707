//! Scenario configuration files (TOML).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use fibrum_core::catalog::{CatalogConnection, Params};
use fibrum_core::transport::IntegratorConfig;
use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bundle_name: unknown bundle `{0}`; expected one of flat, sphere, nonlinear-demo, tm-custom-christoffel")]
    UnknownBundle(String),
    #[error("bundle_params: {0}")]
    BundleParams(String),
    #[error("scenario_params.{name}: required by scenario `{scenario}`")]
    MissingParam { scenario: Scenario, name: &'static str },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    VerifyAll,
    CurvatureComparison,
    Transport,
    Geodesic,
    Holonomy,
    CurvatureTable,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::VerifyAll => "verify-all",
            Scenario::CurvatureComparison => "curvature-comparison",
            Scenario::Transport => "transport",
            Scenario::Geodesic => "geodesic",
            Scenario::Holonomy => "holonomy",
            Scenario::CurvatureTable => "curvature-table",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scenario parameter: a number, a vector of numbers or a word.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Vector(Vec<f64>),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_step() -> f64 {
    IntegratorConfig::default().step
}

fn default_max_steps() -> usize {
    IntegratorConfig::default().max_steps
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection { step: default_step(), max_steps: default_max_steps() }
    }
}

/// The raw file layout.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    bundle_name: String,
    #[serde(default)]
    bundle_params: BTreeMap<String, f64>,
    scenario: Scenario,
    #[serde(default)]
    scenario_params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    integrator: IntegratorSection,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    output_path: Option<String>,
}

/// A validated scenario configuration with defaults filled in.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub bundle_name: String,
    pub bundle_params: Params,
    pub scenario: Scenario,
    pub scenario_params: BTreeMap<String, ParamValue>,
    pub integrator: IntegratorConfig,
    pub tolerances: BTreeMap<String, f64>,
    pub output_path: Option<String>,
    pub seed: u64,
}

impl ScenarioConfig {
    /// `verify-all` on `bundle` with every default.
    pub fn verify(bundle: &str) -> Result<Self, ConfigError> {
        Self::from_raw(RawConfig {
            bundle_name: bundle.to_string(),
            bundle_params: BTreeMap::new(),
            scenario: Scenario::VerifyAll,
            scenario_params: BTreeMap::new(),
            integrator: IntegratorSection::default(),
            tolerances: BTreeMap::new(),
            output_path: None,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let integrator = IntegratorConfig { step: raw.integrator.step, max_steps: raw.integrator.max_steps };
        integrator
            .validate()
            .map_err(|e| ConfigError::Invalid { field: "integrator".into(), message: e.to_string() })?;
        let seed = match raw.scenario_params.get("seed") {
            None => DEFAULT_SEED,
            Some(ParamValue::Number(v)) if *v >= 0.0 && v.trunc() == *v && *v <= u64::MAX as f64 => *v as u64,
            Some(_) => {
                return Err(ConfigError::Invalid {
                    field: "scenario_params.seed".into(),
                    message: "must be a non-negative integer".into(),
                })
            }
        };
        for (name, tol) in &raw.tolerances {
            if !(tol.is_finite() && *tol >= 0.0) {
                return Err(ConfigError::Invalid {
                    field: format!("tolerances.{name}"),
                    message: "must be a finite non-negative number".into(),
                });
            }
        }
        let cfg = ScenarioConfig {
            bundle_name: raw.bundle_name,
            bundle_params: raw.bundle_params,
            scenario: raw.scenario,
            scenario_params: raw.scenario_params,
            integrator,
            tolerances: raw.tolerances,
            output_path: raw.output_path,
            seed,
        };
        cfg.connection()?;
        cfg.check_required()?;
        Ok(cfg)
    }

    /// Instantiates the catalog connection named by the config.
    pub fn connection(&self) -> Result<CatalogConnection, ConfigError> {
        if !fibrum_core::catalog::CATALOG_NAMES.contains(&self.bundle_name.as_str()) {
            return Err(ConfigError::UnknownBundle(self.bundle_name.clone()));
        }
        CatalogConnection::from_name(&self.bundle_name, &self.bundle_params)
            .map_err(|e| ConfigError::BundleParams(e.to_string()))
    }

    fn check_required(&self) -> Result<(), ConfigError> {
        let has = |k: &str| self.scenario_params.contains_key(k);
        let missing = |name| Err(ConfigError::MissingParam { scenario: self.scenario, name });
        match self.scenario {
            Scenario::VerifyAll | Scenario::CurvatureComparison | Scenario::CurvatureTable => Ok(()),
            Scenario::Transport => {
                if !has("y0") {
                    return missing("y0");
                }
                if has("center") && has("radius") {
                    return Ok(());
                }
                for k in ["from", "to"] {
                    if !has(k) {
                        return missing(k);
                    }
                }
                Ok(())
            }
            Scenario::Geodesic => {
                for k in ["x0", "v0"] {
                    if !has(k) {
                        return missing(k);
                    }
                }
                Ok(())
            }
            Scenario::Holonomy => {
                if has("theta0") || (has("center") && has("radius")) {
                    Ok(())
                } else {
                    missing("theta0")
                }
            }
        }
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.scenario_params.get(key) {
            None => Ok(None),
            Some(ParamValue::Number(v)) => Ok(Some(*v)),
            Some(_) => Err(self.wrong_type(key, "a number")),
        }
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.number(key)? {
            None => Ok(default),
            Some(v) if v >= 1.0 && v.trunc() == v && v <= 1e7 => Ok(v as usize),
            Some(_) => Err(self.wrong_type(key, "a positive integer")),
        }
    }

    pub fn vector(&self, key: &str, len: usize) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.scenario_params.get(key) {
            None => Ok(None),
            Some(ParamValue::Vector(v)) if v.len() == len => Ok(Some(v.clone())),
            Some(_) => Err(self.wrong_type(key, &format!("a list of {len} numbers"))),
        }
    }

    pub fn text(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.scenario_params.get(key) {
            None => Ok(None),
            Some(ParamValue::Text(s)) => Ok(Some(s)),
            Some(_) => Err(self.wrong_type(key, "a string")),
        }
    }

    /// The tolerance named `check`, or `default` when the config leaves it unset.
    pub fn tolerance(&self, check: &str, default: f64) -> f64 {
        self.tolerances.get(check).copied().unwrap_or(default)
    }

    fn wrong_type(&self, key: &str, what: &str) -> ConfigError {
        ConfigError::Invalid { field: format!("scenario_params.{key}"), message: format!("expected {what}") }
    }
}

/// Reads a config from `path`, or from standard input when `path` is `-`.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|source| ConfigError::Io { path: "<stdin>".into(), source })?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?
    };
    ScenarioConfig::from_toml(&text)
}
