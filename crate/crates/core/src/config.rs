//! Pipeline configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::{AmbiguityMode, AmbiguityParams};
use crate::behavior::PopulationConfig;
use crate::dopf::Mode;
use crate::posteval::{Penalties, RealizationSource};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Network bundle directory, relative to the config file.
    pub network: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Master seed for scenarios and realizations.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub population: PopulationConfig,
    #[serde(default)]
    pub scenarios: ScenarioConfig,
    #[serde(default)]
    pub ambiguity: AmbiguityConfig,
    #[serde(default)]
    pub dopf: DopfConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub count: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { count: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmbiguityConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    pub ridge: f64,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        Self {
            gamma1: 0.1,
            gamma2: 1.0,
            epsilon: 0.1,
            ridge: 1e-3,
        }
    }
}

impl AmbiguityConfig {
    pub fn params(
        &self,
        mode: AmbiguityMode,
    ) -> std::result::Result<AmbiguityParams, crate::ambiguity::AmbiguityError> {
        AmbiguityParams::new(self.gamma1, self.gamma2, self.epsilon, mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DopfConfig {
    pub z: f64,
    pub polygon_edges: usize,
    pub modes: Vec<Mode>,
}

impl Default for DopfConfig {
    fn default() -> Self {
        Self {
            z: 0.2,
            polygon_edges: 12,
            modes: Mode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub realizations: usize,
    pub source: RealizationSource,
    pub penalties: Penalties,
    /// Per-unit slack above which a realization counts as violated.
    pub tol: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            realizations: 1000,
            source: RealizationSource::Gaussian,
            penalties: Penalties::default(),
            tol: 1e-4,
        }
    }
}

impl PipelineConfig {
    /// Defaults around a network bundle.
    pub fn for_network(network: impl Into<PathBuf>) -> Self {
        Self {
            network: network.into(),
            output: default_output(),
            seed: default_seed(),
            population: PopulationConfig::default(),
            scenarios: ScenarioConfig::default(),
            ambiguity: AmbiguityConfig::default(),
            dopf: DopfConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    /// Parses and validates a config file. A relative network path is
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        if cfg.network.is_relative() {
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            cfg.network = dir.join(&cfg.network);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !self.network.is_dir() {
            return bad(format!(
                "network bundle {} not found",
                self.network.display()
            ));
        }
        if self.scenarios.count < 2 {
            return bad(format!(
                "scenarios.count = {} must be >= 2",
                self.scenarios.count
            ));
        }
        if self.dopf.modes.is_empty() {
            return bad("dopf.modes must not be empty".into());
        }
        if self.eval.realizations == 0 {
            return bad("eval.realizations must be >= 1".into());
        }
        if !(self.eval.tol >= 0.0) {
            return bad("eval.tol must be >= 0".into());
        }
        if !(self.ambiguity.ridge >= 0.0) {
            return bad("ambiguity.ridge must be >= 0".into());
        }
        self.population
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("population: {e}")))?;
        self.ambiguity
            .params(AmbiguityMode::M1)
            .map_err(|e| ConfigError::Invalid(format!("ambiguity: {e}")))?;
        let p = &self.eval.penalties;
        if [p.balance, p.line, p.voltage, p.reactive]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return bad("eval.penalties must be nonnegative".into());
        }
        Ok(())
    }
}
