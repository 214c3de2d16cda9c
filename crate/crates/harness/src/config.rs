//! TOML experiment configuration.
//!
//! ```toml
//! trials = 10
//! seed = 0
//! budget = 20000
//!
//! [env]
//! env = "pendulum"
//! bins = 5
//!
//! [[policy]]
//! name = "dp-k10"
//! algorithm = "dp"
//! kappa = 10.0
//! ```
//!
//! Every `[[policy]]` table accepts the fields of [`ExplorerConfig`]; `budget`,
//! `seed` and `start_state` are owned by the experiment and overwritten.
//! `workers` and `out` only affect execution and are left out of the config
//! echo in every output, so results stay byte-identical across machines and
//! output directories.

use std::path::{Path, PathBuf};

use kexplore::environments::EnvSpec;
use kexplore::explorers::ExplorerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const DEFAULT_TRIALS: usize = 10;

/// One policy on one environment, repeated over `n_trials` seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub policy: String,
    pub env: EnvSpec,
    pub explorer: ExplorerConfig,
    pub n_trials: usize,
    pub base_seed: u64,
    /// Execution settings; they never change results and are not echoed.
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        if self.explorer.budget == 0 {
            return Err(HarnessError::Config("budget must be at least 1".into()));
        }
        check_policy_name(&self.policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub name: String,
    #[serde(flatten)]
    pub explorer: ExplorerConfig,
}

/// A configuration file: one environment and any number of policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub env: EnvSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the desk-scale budget of the environment.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(rename = "policy", default)]
    pub policies: Vec<PolicyConfig>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// Command-line replacements for file values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub budget: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub full_scale: bool,
}

/// `(bins, budget)` for the small and the full-size benchmarks.
pub fn scale_defaults(env: &EnvSpec, full_scale: bool) -> Option<(usize, u64)> {
    match (env, full_scale) {
        (EnvSpec::Pendulum { .. }, false) => Some((5, 20_000)),
        (EnvSpec::Pendulum { .. }, true) => Some((10, 100_000)),
        (EnvSpec::MountainCar { .. }, false) => Some((7, 100_000)),
        (EnvSpec::MountainCar { .. }, true) => Some((13, 1_000_000)),
        (EnvSpec::Random { .. }, _) => None,
    }
}

const RANDOM_ENV_BUDGET: u64 = 10_000;

fn check_policy_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !name.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(HarnessError::Config(format!(
            "policy name {name:?} must be non-empty and use only letters, digits, '-', '_' and '.'"
        )))
    }
}

/// Policy keys that [`ExplorerConfig`] does not know are rejected rather than
/// silently dropped by the flattened deserializer.
fn check_policy_keys(raw: &toml::Table) -> Result<()> {
    let known = toml::Table::try_from(ExplorerConfig::default()).expect("explorer config serializes");
    let Some(toml::Value::Array(policies)) = raw.get("policy") else {
        return Ok(());
    };
    for policy in policies {
        let Some(table) = policy.as_table() else {
            return Err(HarnessError::Config("[[policy]] entries must be tables".into()));
        };
        for key in table.keys() {
            if key != "name" && key != "eta" && !known.contains_key(key) {
                return Err(HarnessError::Config(format!("unknown policy key {key:?}")));
            }
        }
    }
    Ok(())
}

impl SuiteConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        check_policy_keys(&raw)?;
        let suite: SuiteConfig = raw.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("suite config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(HarnessError::Config("at least one [[policy]] is required".into()));
        }
        for (i, p) in self.policies.iter().enumerate() {
            check_policy_name(&p.name)?;
            if self.policies[..i].iter().any(|q| q.name == p.name) {
                return Err(HarnessError::Config(format!("duplicate policy name {:?}", p.name)));
            }
        }
        for experiment in self.experiments() {
            experiment.validate()?;
        }
        Ok(())
    }

    pub fn budget(&self) -> u64 {
        self.budget.unwrap_or_else(|| scale_defaults(&self.env, false).map_or(RANDOM_ENV_BUDGET, |(_, n)| n))
    }

    /// Applies command-line values; `full_scale` first switches benchmark
    /// environments to their full bin counts and budgets.
    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if overrides.full_scale {
            if let Some((bins, budget)) = scale_defaults(&self.env, true) {
                match &mut self.env {
                    EnvSpec::Pendulum { bins: b, .. } | EnvSpec::MountainCar { bins: b, .. } => *b = bins,
                    EnvSpec::Random { .. } => {}
                }
                self.budget = Some(budget);
            }
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            self.trials = trials;
        }
        if let Some(budget) = overrides.budget {
            self.budget = Some(budget);
        }
        if let Some(workers) = overrides.workers {
            self.workers = Some(workers);
        }
        if let Some(out) = &overrides.out {
            self.out = Some(out.clone());
        }
        self.validate()
    }

    /// One experiment per policy, in file order.
    pub fn experiments(&self) -> Vec<ExperimentConfig> {
        let budget = self.budget();
        self.policies
            .iter()
            .map(|p| ExperimentConfig {
                policy: p.name.clone(),
                env: self.env.clone(),
                explorer: ExplorerConfig {
                    budget,
                    seed: self.seed,
                    start_state: 0,
                    ..p.explorer.clone()
                },
                n_trials: self.trials,
                base_seed: self.seed,
                workers: self.workers,
                output: self.out.clone(),
            })
            .collect()
    }
}
