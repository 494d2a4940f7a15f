//! Drives the experiment runner from a config file, the same path the
//! `snnlab` binary takes. Pass a config path, or run the built-in one:
//!
//! ```text
//! cargo run --release --example experiment -- configs/check.cfg
//! ```

use std::path::Path;

use snn_stability::lab::{run_command, Command, ExperimentConfig};

const BUILT_IN: &str = "master_seed = 7
[distribution]
d = 5
[model]
m = 64
[training]
n = 32
horizon = 30
[check]
pairs = 2000
instances = 50
trajectory_runs = 4
";

fn main() -> snn_stability::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path)?,
        None => BUILT_IN.to_string(),
    };
    let cfg = ExperimentConfig::parse(&text)?;
    let out = Path::new(&cfg.output_dir).join("example-check");
    let outcome = run_command(Command::Check, &cfg, &out)?;
    println!("{} violation(s), {} optimizer steps", outcome.violations, outcome.steps_executed);
    for f in &outcome.files {
        println!("  {}", out.join(f).display());
    }
    Ok(())
}
