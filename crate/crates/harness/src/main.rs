use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kexplore_harness::commands::{execute, Command};
use kexplore_harness::Overrides;

/// Active exploration experiments on tabular MDPs.
#[derive(Parser)]
#[command(name = "kappa-explore", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the single policy of a config file over all trials.
    Run(Flags),
    /// Run every policy of a config file and print a comparison table.
    Compare(Flags),
    /// Run one trial with gap tracking and fit the convergence rate.
    Converge(Flags),
    /// Write the transition kernel of the configured environment.
    ExportEnv(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Full-size environments and budgets.
    #[arg(long)]
    full_scale: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (command, flags) = match cli.command {
        Sub::Run(f) => (Command::Run, f),
        Sub::Compare(f) => (Command::Compare, f),
        Sub::Converge(f) => (Command::Converge, f),
        Sub::ExportEnv(f) => (Command::ExportEnv, f),
    };
    let overrides = Overrides {
        seed: flags.seed,
        trials: flags.trials,
        budget: flags.budget,
        workers: flags.workers,
        out: flags.out,
        full_scale: flags.full_scale,
    };
    match execute(command, &flags.config, &overrides) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
