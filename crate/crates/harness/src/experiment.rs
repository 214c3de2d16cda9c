//! Multi-trial runs, per-trial seeds and on-disk persistence.

use std::path::Path;

use kexplore::environments::Environment;
use kexplore::explorers::{run_explorer, ExplorerConfig, RunTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::{aggregate, extended_real, pair_loss, MetricsReport, TrialMetrics};
use crate::report::emit_table;

/// SplitMix64 output for `state`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`: SplitMix64 applied to `base + index`, so earlier
/// trials keep their seeds when more are added.
pub fn trial_seed(base: u64, index: usize) -> u64 {
    splitmix64(base.wrapping_add(index as u64))
}

/// Everything one trial produced. `trace` is absent when the agent crashed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    pub trace: Option<RunTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub report: MetricsReport,
    pub trials: Vec<TrialOutcome>,
}

/// The persisted form of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub policy: String,
    pub env: String,
    pub trial: usize,
    pub explorer: ExplorerConfig,
    pub total_steps: u64,
    pub pair_counts: Vec<u64>,
    #[serde(with = "extended_real")]
    pub worst: f64,
    #[serde(with = "extended_real")]
    pub avg: f64,
    pub failed: bool,
    pub error: Option<String>,
    pub episodes: usize,
    pub fallback_episodes: Vec<usize>,
    pub gap_history: Option<Vec<(u64, f64)>>,
}

/// The persisted form of a whole experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub config: ExperimentConfig,
    pub report: MetricsReport,
}

fn run_trial(env: &Environment, base: &ExplorerConfig, index: usize, base_seed: u64) -> TrialOutcome {
    let seed = trial_seed(base_seed, index);
    let cfg = ExplorerConfig { seed, ..base.clone() };
    let scored = run_explorer(&env.kernel, &cfg).and_then(|trace| {
        let table = pair_loss(&env.kernel, &trace.counts, cfg.budget).map_err(|e| match e {
            HarnessError::Core(e) => e,
            other => kexplore::Error::Numerical(other.to_string()),
        })?;
        Ok((trace, aggregate(&table)))
    });
    match scored {
        Ok((trace, agg)) => TrialOutcome {
            metrics: TrialMetrics {
                index,
                seed,
                worst: agg.worst,
                avg: agg.avg,
                failed: agg.failed,
                error: None,
            },
            trace: Some(trace),
        },
        Err(e) => {
            eprintln!("trial {index} (seed {seed}) crashed: {e}");
            TrialOutcome {
                metrics: TrialMetrics::crashed(index, seed, e.to_string()),
                trace: None,
            }
        }
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {workers:?} workers: {e}")))
}

/// Builds the environment and runs every trial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let env = build_environment(cfg)?;
    run_on(cfg, &env)
}

/// Configuration mistakes in the environment surface as config errors.
pub fn build_environment(cfg: &ExperimentConfig) -> Result<Environment> {
    cfg.env.build().map_err(|e| match e {
        kexplore::Error::Input(msg) => HarnessError::Config(msg),
        other => HarnessError::Core(other),
    })
}

/// Runs the trials of `cfg` on an already built environment, up to
/// `cfg.workers` at a time.
pub fn run_on(cfg: &ExperimentConfig, env: &Environment) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.explorer.start_state = env.start_state;
    cfg.explorer
        .validate(&env.kernel)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut trials: Vec<TrialOutcome> = pool(cfg.workers)?.install(|| {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|i| run_trial(env, &cfg.explorer, i, cfg.base_seed))
            .collect()
    });
    trials.sort_by_key(|t| t.metrics.index);
    let report = MetricsReport::new(
        cfg.policy.clone(),
        env.name.clone(),
        cfg.explorer.budget,
        trials.iter().map(|t| t.metrics.clone()).collect(),
    );
    Ok(ExperimentOutcome {
        config: cfg,
        report,
        trials,
    })
}

impl ExperimentOutcome {
    pub fn trial_records(&self) -> Vec<TrialRecord> {
        self.trials
            .iter()
            .map(|t| {
                let m = &t.metrics;
                let explorer = ExplorerConfig {
                    seed: m.seed,
                    ..self.config.explorer.clone()
                };
                let (total_steps, pair_counts, episodes, fallback_episodes, gap_history) = match &t.trace {
                    Some(tr) => (
                        tr.counts.total_steps(),
                        tr.counts.pair_counts().to_vec(),
                        tr.episodes,
                        tr.fallback_episodes.clone(),
                        tr.gap_history.clone(),
                    ),
                    None => (0, Vec::new(), 0, Vec::new(), None),
                };
                TrialRecord {
                    policy: self.config.policy.clone(),
                    env: self.report.env.clone(),
                    trial: m.index,
                    explorer,
                    total_steps,
                    pair_counts,
                    worst: m.worst,
                    avg: m.avg,
                    failed: m.failed,
                    error: m.error.clone(),
                    episodes,
                    fallback_episodes,
                    gap_history,
                }
            })
            .collect()
    }

    /// Writes `report.csv`, `report.json` and `trace_<k>.json` into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write(&dir.join("report.csv"), &emit_table(std::slice::from_ref(&self.report)).csv)?;
        let record = ReportRecord {
            config: self.config.clone(),
            report: self.report.clone(),
        };
        write(&dir.join("report.json"), &to_json(&record)?)?;
        self.persist_traces(dir)
    }

    pub fn persist_traces(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        for record in self.trial_records() {
            write(&dir.join(format!("trace_{}.json", record.trial)), &to_json(&record)?)?;
        }
        Ok(())
    }
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub(crate) fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
