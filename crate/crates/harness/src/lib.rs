//! Experiment harness for the exploration toolkit: per-pair loss metrics,
//! TOML configuration, parallel seeded trials, persistence and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod report;

pub use config::{ExperimentConfig, Overrides, PolicyConfig, SuiteConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_on, trial_seed, ExperimentOutcome};
pub use metrics::{aggregate, pair_loss, MetricsReport, PairLossTable};
pub use report::{emit_convergence, emit_table, parse_csv, Table, TableRow};
