use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use perturb_cli::{execute, Command, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "perturb",
    version,
    about = "Run online-learning experiments from a config file"
)]
struct Args {
    #[command(subcommand)]
    command: Cmd,

    /// replace the config's seed list (comma separated)
    #[arg(long, global = true, value_delimiter = ',')]
    seed_override: Option<Vec<u64>>,

    /// write artifacts here instead of the config's output_dir
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Monte Carlo draws (per round, or per history for verify)
    #[arg(long, global = true)]
    samples: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// run the experiment named by the config's `kind`
    Run { config: PathBuf },
    /// check sampled and closed-form Gumbel FPL against exponential weights
    Verify { config: PathBuf },
    /// run every forecaster in `variants` (or every sweep point) against one adversary
    Compare { config: PathBuf },
    /// play the online shortest-path game
    Path { config: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, config) = match args.command {
        Cmd::Run { config } => (Command::Run, config),
        Cmd::Verify { config } => (Command::Verify, config),
        Cmd::Compare { config } => (Command::Compare, config),
        Cmd::Path { config } => (Command::Path, config),
    };
    let overrides = Overrides {
        seeds: args.seed_override,
        out_dir: args.out_dir,
        samples: args.samples,
    };
    match execute(command, &config, &overrides) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            println!("summary: {}", outcome.summary.display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("requested checks failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
