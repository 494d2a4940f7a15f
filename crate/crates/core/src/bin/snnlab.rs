use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snn_stability::lab::{exit_code, run_command, Command, ExperimentConfig};
use snn_stability::LabError;

#[derive(Parser)]
#[command(name = "snnlab", version, about = "Stability and generalization experiments for shallow networks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Maximum optimizer steps; overrides [budget] max_steps.
    #[arg(long, global = true)]
    budget: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Run the property suite; exits 1 on any violation.
    Check,
    /// Estimate on-average stability at the configured n.
    Stability,
    /// Stability scaling or excess-risk sweep over [sweep] n_grid.
    Sweep,
    /// Width thresholds and bound tables.
    Bounds,
    /// Train once and save scalars, data and the final model.
    Train,
}

fn run(cli: &Cli) -> Result<i32, LabError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| LabError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(budget) = cli.budget {
        cfg.max_steps = Some(budget);
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let command = match cli.command {
        Cmd::Check => Command::Check,
        Cmd::Stability => Command::Stability,
        Cmd::Sweep => Command::Sweep,
        Cmd::Bounds => Command::Bounds,
        Cmd::Train => Command::Train,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        pool = pool.num_threads(jobs.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| run_command(command, &cfg, &out))?;
    println!(
        "{}: {} violation(s), {} optimizer steps, output in {}",
        command.name(),
        outcome.violations,
        outcome.steps_executed,
        out.display()
    );
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("snnlab: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
