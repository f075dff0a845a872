use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use megalab::harness::{self, HarnessError, RunConfig, SweepConfig};
use megalab::select::Strategy;

#[derive(Parser)]
#[command(name = "megalab", version, about = "Goal-selection experiments for multi-goal RL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent on a maze and write its metric CSV.
    Train {
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Flat `key = value` file; flags given on the command line win.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the goal-chain experiment.
    Toy {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 2000)]
        iterations: usize,
        #[arg(long, value_delimiter = ',', default_value = "mega,eg-oracle,diverse,achieved")]
        policies: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a strategy × seed grid described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train {
            env,
            strategy,
            seed,
            steps,
            out,
            config,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::from_file(&path)?,
                None => RunConfig::default(),
            };
            if let Some(v) = env {
                cfg.set("env", &v)?;
            }
            if let Some(v) = strategy {
                cfg.set("strategy", &v)?;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = steps {
                cfg.total_steps = Some(v);
            }
            harness::train_to_file(&cfg, &out)?;
        }
        Command::Toy {
            n,
            trials,
            iterations,
            policies,
            seed,
            out,
        } => {
            let policies = policies
                .iter()
                .map(|p| p.parse::<Strategy>().map_err(HarnessError::Config))
                .collect::<Result<Vec<_>, _>>()?;
            harness::toy_to_file(n, &policies, iterations, trials, seed, &out)?;
        }
        Command::Sweep { config } => {
            let sweep = SweepConfig::from_file(&config)?;
            harness::run_sweep(&sweep)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
