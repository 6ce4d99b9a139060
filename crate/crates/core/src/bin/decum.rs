use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use decumulation::commands;
use decumulation::config::RunConfig;
use decumulation::policy_net::Checkpoint;
use decumulation::{Error, Result};

#[derive(Parser)]
#[command(name = "decum", version, about = "Retirement drawdown policy training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the command's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the ESG to historical data.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Historical CSV (`year,cpi,s,E,N,B,O,HPI`); bundled data otherwise.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Write a scenario panel CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Train a policy.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Compare a trained policy with the deterministic rules.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory of snapshot checkpoints for the outperformance curve.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Record one seeded retirement under a trained policy.
    DemoPath {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn load_config(common: &Common, checkpoint: Option<&Checkpoint>) -> Result<RunConfig> {
    match (&common.config, checkpoint) {
        (Some(path), _) => RunConfig::load(path),
        (None, Some(ck)) => commands::checkpoint_config(ck),
        (None, None) => Ok(RunConfig::default()),
    }
}

fn set_threads(common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate { common, history } => {
            set_threads(&common)?;
            let mut cfg = load_config(&common, None)?;
            if history.is_some() {
                cfg.data.history = history;
            }
            let p = commands::calibrate(&cfg, &common.out)?;
            for (k, v) in p.entries() {
                println!("{k:>8} = {v:.4}");
            }
        }
        Command::Simulate {
            common,
            paths,
            horizon,
        } => {
            set_threads(&common)?;
            let mut cfg = load_config(&common, None)?;
            if let Some(h) = horizon {
                cfg.retiree.horizon = h;
            }
            let seed = common.seed.unwrap_or(cfg.simulation.train_seed);
            commands::simulate(&cfg, paths, seed, &common.out)?;
        }
        Command::Train { common, iterations } => {
            set_threads(&common)?;
            let mut cfg = load_config(&common, None)?;
            if let Some(seed) = common.seed {
                cfg.training.seed = seed;
            }
            if let Some(n) = iterations {
                cfg.training.iterations = n;
            }
            cfg.validate()?;
            let outcome = commands::train_policy(&cfg, &common.out)?;
            for row in &outcome.report.rows {
                if cfg.training.checkpoint_every > 0 && row.iter % cfg.training.checkpoint_every == 0 {
                    println!("iter {:>6}  objective {:.6e}", row.iter, row.objective);
                }
            }
        }
        Command::Evaluate {
            common,
            checkpoint,
            snapshots,
        } => {
            set_threads(&common)?;
            let ck = Checkpoint::load(&checkpoint)?;
            let mut cfg = load_config(&common, Some(&ck))?;
            if let Some(seed) = common.seed {
                cfg.simulation.test_seed = seed;
            }
            cfg.validate()?;
            let report = commands::evaluate(&cfg, &ck, snapshots.as_deref(), &common.out)?;
            println!("policy mean utility {:.6e}", report.mean_policy_utility());
            for s in &report.strategies {
                println!(
                    "{:>14}: outperformed on {}/{} paths",
                    s.kind.name(),
                    s.outperformed,
                    report.paths()
                );
            }
        }
        Command::DemoPath { common, checkpoint } => {
            set_threads(&common)?;
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = load_config(&common, Some(&ck))?;
            let seed = common.seed.unwrap_or(cfg.simulation.test_seed);
            commands::demo_path(&cfg, &ck, seed, &common.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            return ExitCode::from(if help { 0 } else { 2 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
