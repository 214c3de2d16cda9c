//! The `kappa-explore` subcommands.

use std::path::{Path, PathBuf};

use kexplore::environments::EnvSpec;
use kexplore::explorers::{run_explorer, ExplorerConfig};
use serde::Serialize;

use crate::config::{Overrides, SuiteConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{build_environment, create_dir, run_on, to_json, trial_seed, write};
use crate::metrics::MetricsReport;
use crate::report::{emit_convergence, emit_table, last_half};

pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Compare,
    Converge,
    ExportEnv,
}

fn load(config: &Path, overrides: &Overrides) -> Result<(SuiteConfig, PathBuf)> {
    let mut suite = SuiteConfig::load(config)?;
    suite.apply(overrides)?;
    let out = suite.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok((suite, out))
}

fn single_policy(suite: &SuiteConfig, command: &str) -> Result<()> {
    if suite.policies.len() == 1 {
        Ok(())
    } else {
        Err(HarnessError::Config(format!(
            "{command} takes exactly one [[policy]], found {}; use compare for several",
            suite.policies.len()
        )))
    }
}

#[derive(Serialize)]
struct SuiteRecord<'a> {
    config: &'a SuiteConfig,
    reports: &'a [MetricsReport],
}

#[derive(Serialize)]
struct ConvergenceRecord<'a> {
    env: String,
    explorer: &'a ExplorerConfig,
    episodes: usize,
    fallback_episodes: &'a [usize],
    points: usize,
    final_gap: Option<f64>,
    /// Least-squares log-log slope over the last half of the history.
    slope: Option<f64>,
    /// The same fit over the last ten recorded gaps.
    slope_last_10: Option<f64>,
}

#[derive(Serialize)]
struct EnvRecord<'a> {
    name: &'a str,
    spec: &'a EnvSpec,
    n_states: usize,
    n_actions: usize,
    start_state: usize,
}

/// Runs `command`, writing outputs below the configured directory, and
/// returns the text meant for standard output.
pub fn execute(command: Command, config: &Path, overrides: &Overrides) -> Result<String> {
    let (suite, out) = load(config, overrides)?;
    match command {
        Command::Run => {
            single_policy(&suite, "run")?;
            let experiment = &suite.experiments()[0];
            let env = build_environment(experiment)?;
            let outcome = run_on(experiment, &env)?;
            outcome.persist(&out)?;
            Ok(emit_table(std::slice::from_ref(&outcome.report)).text)
        }
        Command::Compare => {
            let experiments = suite.experiments();
            let env = build_environment(&experiments[0])?;
            let mut reports = Vec::new();
            for experiment in &experiments {
                let outcome = run_on(experiment, &env)?;
                outcome.persist_traces(&out.join(&experiment.policy))?;
                reports.push(outcome.report);
            }
            let table = emit_table(&reports);
            create_dir(&out)?;
            write(&out.join("report.csv"), &table.csv)?;
            let record = SuiteRecord {
                config: &suite,
                reports: &reports,
            };
            write(&out.join("report.json"), &to_json(&record)?)?;
            Ok(table.text)
        }
        Command::Converge => {
            single_policy(&suite, "converge")?;
            let experiment = &suite.experiments()[0];
            let env = build_environment(experiment)?;
            let cfg = ExplorerConfig {
                seed: trial_seed(suite.seed, 0),
                start_state: env.start_state,
                track_gap: true,
                ..experiment.explorer.clone()
            };
            cfg.validate(&env.kernel)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let trace = run_explorer(&env.kernel, &cfg)?;
            let convergence = emit_convergence(&trace);
            let history = trace.gap_history.as_deref().unwrap_or(&[]);
            let tail = &history[history.len().saturating_sub(10)..];
            let record = ConvergenceRecord {
                env: env.name.clone(),
                explorer: &cfg,
                episodes: trace.episodes,
                fallback_episodes: &trace.fallback_episodes,
                points: history.len(),
                final_gap: history.last().map(|p| p.1),
                slope: convergence.slope,
                slope_last_10: crate::report::log_log_slope(tail),
            };
            create_dir(&out)?;
            write(&out.join("convergence.csv"), &convergence.csv)?;
            write(&out.join("convergence.json"), &to_json(&record)?)?;
            let fmt = |x: Option<f64>| x.map_or("--".to_string(), |v| format!("{v:.4}"));
            Ok(format!(
                "{} points, final gap {}, slope over the last {} points {}\n",
                history.len(),
                fmt(record.final_gap),
                last_half(history).len(),
                fmt(record.slope)
            ))
        }
        Command::ExportEnv => {
            let experiment = &suite.experiments()[0];
            let env = build_environment(experiment)?;
            create_dir(&out)?;
            write(&out.join("kernel.txt"), &env.kernel.to_text())?;
            let record = EnvRecord {
                name: &env.name,
                spec: &suite.env,
                n_states: env.kernel.n_states(),
                n_actions: env.kernel.n_actions(),
                start_state: env.start_state,
            };
            write(&out.join("env.json"), &to_json(&record)?)?;
            Ok(format!(
                "{}: {} states, {} actions, start state {}\n",
                env.name,
                env.kernel.n_states(),
                env.kernel.n_actions(),
                env.start_state
            ))
        }
    }
}
