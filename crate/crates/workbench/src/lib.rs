//! Experiment runner for `opcalc-core`: configuration files, seeded ensembles, committed
//! baseline constants, CSV reports and torus snapshots.

pub mod baseline;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod seeds;
pub mod snapshot;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use baseline::BaselineStore;
pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use error::{Result, WorkbenchError};
pub use experiments::{Context, Mode};
pub use report::Report;
pub use seeds::SeedStream;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "OPCALC_OUT";

/// Output directory: `--out`, else the config's `[output] dir`, else
/// `$OPCALC_OUT/<experiment>`, else `opcalc-out/<experiment>`.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    if let Some(d) = &cfg.output.dir {
        return PathBuf::from(d);
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("opcalc-out"));
    root.join(cfg.experiment.name())
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(j).build().map_err(|e| WorkbenchError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs `cfg` against the baselines in `store`; `seed` overrides the config's seed.
pub fn run_experiment(cfg: &ExperimentConfig, store: &BaselineStore, seed: Option<u64>, jobs: Option<usize>) -> Result<Report> {
    let ctx = Context { seeds: SeedStream::new(seed.unwrap_or(cfg.seed)), baselines: store, mode: Mode::Check };
    with_pool(jobs, || experiments::run(cfg, &ctx))?
}

/// Loads, runs and writes one configuration. Returns the report and where it went.
pub fn run_file(path: &Path, out: Option<&Path>, seed: Option<u64>, jobs: Option<usize>, store: &BaselineStore) -> Result<(Report, PathBuf)> {
    let cfg = ExperimentConfig::load(path)?;
    let report = run_experiment(&cfg, store, seed, jobs)?;
    let dir = output_dir(&cfg, out);
    report.write(&dir, cfg.experiment.name(), cfg.hash(), seed.unwrap_or(cfg.seed))?;
    Ok((report, dir))
}

fn audit_note(seed: u64) -> String {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("seed={seed} unix_time={secs}")
}

/// Measures the constants of `cfg` and records them in the store at `store_path`.
///
/// An existing entry for the same config hash is kept unless `force`; the refusal happens
/// before anything is computed.
pub fn capture_baseline(cfg: &ExperimentConfig, store_path: &Path, force: bool, jobs: Option<usize>) -> Result<BTreeMap<String, f64>> {
    if !cfg.experiment.has_baseline() {
        return Err(WorkbenchError::NoBaselineConstants(cfg.experiment.name().into()));
    }
    let mut store = BaselineStore::load(store_path)?;
    if store.contains(cfg.hash()) && !force {
        return Err(WorkbenchError::BaselineExists(cfg.hash().into()));
    }
    let empty = BaselineStore::default();
    let ctx = Context { seeds: SeedStream::new(cfg.seed), baselines: &empty, mode: Mode::Capture };
    let report = with_pool(jobs, || experiments::run(cfg, &ctx))??;
    store.insert(cfg.hash(), cfg.experiment.name(), report.constants.clone(), force, &audit_note(cfg.seed))?;
    store.save(store_path)?;
    Ok(report.constants)
}
