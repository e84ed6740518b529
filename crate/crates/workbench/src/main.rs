use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opcalc::{baseline, capture_baseline, run_file, BaselineStore, ExperimentConfig, ExperimentKind, Result};

#[derive(Parser)]
#[command(name = "opcalc", version, about = "Operator calculus experiments on fuzzy tori")]
struct Cli {
    /// Baseline constants file.
    #[arg(long, global = true, env = "OPCALC_BASELINES")]
    baselines: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's [output] dir, else $OPCALC_OUT/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Measure and record the baseline constants of a configuration.
    Baseline {
        config: PathBuf,
        /// Overwrite an existing entry for the same config hash.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the experiment kinds.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let store_path = cli.baselines.unwrap_or_else(baseline::default_path);
    match dispatch(cli.command, &store_path) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command, store_path: &std::path::Path) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, out, seed, jobs } => {
            let store = BaselineStore::load(store_path)?;
            let (report, dir) = run_file(&config, out.as_deref(), seed, jobs, &store)?;
            let failed: Vec<_> = report.failures().collect();
            println!("{} assertions, {} failed; report in {}", report.checks.len(), failed.len(), dir.display());
            for c in &failed {
                println!("FAIL {} value={:e} bound={:e}", c.name, c.value, c.bound);
            }
            Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Baseline { config, force, jobs } => {
            let cfg = ExperimentConfig::load(&config)?;
            let constants = capture_baseline(&cfg, store_path, force, jobs)?;
            println!("recorded {} constants for {} ({}) in {}", constants.len(), cfg.experiment, cfg.hash(), store_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<20} {}", k.name(), k.describe());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
