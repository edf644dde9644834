//! Configuration file schema (TOML or JSON).

use std::path::{Path, PathBuf};

use heavytail_opt::harness::{DerivedParams, ExperimentSpec, Method, ParamsSpec, StartSpec, Targets};
use heavytail_opt::{NoiseSpec, ProblemSpec, RecordPolicy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Grid expanded by `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub eps: Vec<f64>,
    /// Hölder exponents; defaults to the problem's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    /// Defaults to the configured method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    /// Run trials at every grid point; `false` only derives parameters.
    #[serde(default = "yes")]
    pub simulate: bool,
}

fn yes() -> bool {
    true
}

/// Settings of the `check` suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default = "default_nu_grid")]
    pub nu_grid: Vec<f64>,
    #[serde(default = "default_k_max")]
    pub k_max: u64,
    #[serde(default = "default_pairs")]
    pub certificate_pairs: u64,
    #[serde(default = "default_draws")]
    pub clip_draws: u64,
    #[serde(default = "default_batches")]
    pub clip_batches: Vec<u64>,
}

fn default_nu_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn default_k_max() -> u64 {
    100_000
}
fn default_pairs() -> u64 {
    10_000
}
fn default_draws() -> u64 {
    100_000
}
fn default_batches() -> Vec<u64> {
    vec![1, 4, 16]
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            nu_grid: default_nu_grid(),
            k_max: default_k_max(),
            certificate_pairs: default_pairs(),
            clip_draws: default_draws(),
            clip_batches: default_batches(),
        }
    }
}

/// Top-level configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: ProblemSpec,
    pub noise: NoiseSpec,
    pub method: Method,
    pub targets: Targets,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default)]
    pub record: RecordPolicy,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
    /// Written by `params --json`; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedParams>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl ConfigFile {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ConfigFile = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if let Some(s) = &self.sweep {
            if s.eps.is_empty() {
                return Err(CliError::Config("sweep.eps must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn experiment(&self) -> ExperimentSpec {
        ExperimentSpec {
            problem: self.problem.clone(),
            noise: self.noise.clone(),
            method: self.method,
            targets: self.targets,
            trials: self.trials,
            seed: self.seed,
            params: self.params,
            start: self.start.clone(),
            record: self.record,
        }
    }
}
