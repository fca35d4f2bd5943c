//! Run configuration, read from a single TOML file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skewmda::analysis::AnalysisConfig;
use skewmda::imputation::ImputationStrategy;
use skewmda::model::Variant;
use skewmda::priors::PriorConfig;
use skewmda::sampler::SamplerConfig;

use crate::error::{io_err, CliError, Result};
use crate::ingest::DataConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    #[serde(default = "yes")]
    pub intercept: bool,
}

fn yes() -> bool {
    true
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { variant: Variant::St, intercept: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Independent chains, run in parallel and pooled for imputation.
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

impl Default for RunSection {
    fn default() -> Self {
        Self { chains: 1, output: default_output() }
    }
}

/// An imputation strategy with the label used in output names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedStrategy {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub strategy: ImputationStrategy,
}

impl NamedStrategy {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            serde_json::to_value(self.strategy.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputationSection {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<NamedStrategy>,
}

fn default_m() -> usize {
    20
}

fn one_u64() -> u64 {
    1
}

fn default_strategies() -> Vec<NamedStrategy> {
    vec![NamedStrategy { name: None, strategy: ImputationStrategy::mar() }]
}

impl Default for ImputationSection {
    fn default() -> Self {
        Self { m: default_m(), seed: 1, strategies: default_strategies() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TippingSection {
    pub delta0: Vec<f64>,
    pub delta1: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub conditional: bool,
    /// Defaults to the imputation `m`.
    #[serde(default)]
    pub m: Option<usize>,
    /// Defaults to the imputation seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub imputation: ImputationSection,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub tipping: Option<TippingSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative data path is taken from the file's
    /// directory, a relative output path from the working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.data.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data.path = dir.join(&cfg.data.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.chains == 0 {
            return Err(CliError::Config("run.chains must be at least 1".into()));
        }
        if self.imputation.m < 2 {
            return Err(CliError::Config("imputation.m must be at least 2 for pooling".into()));
        }
        let mut seen = HashSet::new();
        for s in &self.imputation.strategies {
            let label = s.label();
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(CliError::Config(format!("strategy name '{label}' must be non-empty ASCII letters, digits, '_' or '-'")));
            }
            if !seen.insert(label.clone()) {
                return Err(CliError::Config(format!("strategy name '{label}' is used twice; set `name`")));
            }
        }
        if let Some(t) = &self.tipping {
            if t.delta0.is_empty() || t.delta1.is_empty() {
                return Err(CliError::Config("tipping grids must be non-empty".into()));
            }
            if t.m.is_some_and(|m| m < 2) {
                return Err(CliError::Config("tipping.m must be at least 2".into()));
            }
        }
        self.sampler.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.prior.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}
