//! Experiment harness: reads a TOML config, runs expert games, comparisons, bound sweeps,
//! equivalence checks or shortest-path games, and writes CSV logs plus a JSON summary.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod output;

use std::path::Path;

use anyhow::{bail, Result};

pub use compare::{compare_forecasters, ComparisonRow, ComparisonTable};
pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use experiment::{run_experiment, Outcome};

/// The subcommands of the `perturb` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Verify,
    Compare,
    Path,
}

/// Loads `config`, applies overrides and runs it as `command`.
pub fn execute(command: Command, config: &Path, overrides: &Overrides) -> Result<Outcome> {
    let mut cfg = ExperimentConfig::load(config)?;
    cfg.apply(overrides)?;
    match command {
        Command::Run => run_experiment(&cfg),
        Command::Verify => experiment::run_verify(&cfg),
        Command::Path => experiment::run_path(&cfg),
        Command::Compare => {
            if cfg.kind == ExperimentKind::BoundSweep {
                experiment::run_sweep(&cfg)
            } else if cfg.variants.len() < 2 {
                bail!("compare needs a `variants` list with at least 2 forecasters");
            } else {
                experiment::run_compare(&cfg)
            }
        }
    }
}
