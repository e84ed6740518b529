//! Acceptance criteria. Prints one line per criterion and exits nonzero if any fails.
//!
//! Experiment-backed criteria run the committed configs in `configs/` against the committed
//! baselines, so a changed config or a stale baseline shows up here as a failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use opcalc::experiments::verify_core::{doubling_sweep, heat_stats, loewner_sweep, perturbation_sweep};
use opcalc::experiments::{chain_rule, ensemble, max_of, moi};
use opcalc::{baseline, BaselineStore, ExperimentConfig, Report, SeedStream};
use opcalc_core::chain::commutative_weight_identity;
use opcalc_core::symbol::SmoothSymbol;
use opcalc_core::torus::TorusAlgebra;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> Result<ExperimentConfig, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).map_err(|e| e.to_string())
}

fn store() -> Result<BaselineStore, String> {
    BaselineStore::load(&baseline::default_path()).map_err(|e| e.to_string())
}

fn run_config(name: &str) -> Result<(ExperimentConfig, Report), String> {
    let cfg = config(name)?;
    let rep = opcalc::run_experiment(&cfg, &store()?, None, None).map_err(|e| e.to_string())?;
    Ok((cfg, rep))
}

/// Passes when every check of the report passes; lists up to three failures otherwise.
fn report_outcome(rep: &Report, what: &str) -> (bool, String) {
    let failed: Vec<String> =
        rep.failures().map(|c| format!("{}={:.4e}", c.name, c.value)).collect();
    let total = rep.checks.len();
    if failed.is_empty() {
        (true, format!("{total} {what} checks"))
    } else {
        let shown: Vec<&str> = failed.iter().take(3).map(String::as_str).collect();
        (false, format!("{}/{total} {what} checks failed: {}", failed.len(), shown.join(", ")))
    }
}

fn timed(limit: Duration, r: Outcome, start: Instant) -> Outcome {
    let (ok, msg) = r?;
    let t = start.elapsed();
    Ok((ok && t <= limit, format!("{msg}; {:.1}s (limit {}s)", t.as_secs_f64(), limit.as_secs())))
}

fn loewner() -> Outcome {
    let start = Instant::now();
    let s = loewner_sweep(SeedStream::new(101), 100, 16, 6).map_err(|e| e.to_string())?;
    let mut ok = s.polynomial <= 1e-11;
    let mut msg = format!("polynomial {:.2e} <= 1e-11", s.polynomial);
    for (name, v) in &s.smooth {
        ok &= *v <= 1e-8;
        msg.push_str(&format!(", {name} {v:.2e} <= 1e-8"));
    }
    timed(Duration::from_secs(10), Ok((ok, msg)), start)
}

fn perturbation() -> Outcome {
    let start = Instant::now();
    let rows = perturbation_sweep(SeedStream::new(102), 50, 8).map_err(|e| e.to_string())?;
    let worst = max_of(rows.iter().map(|r| r.1));
    let cases = rows.len();
    timed(Duration::from_secs(30), Ok((worst <= 1e-11, format!("{cases} (order, slot) cases, worst {worst:.2e} <= 1e-11"))), start)
}

fn chain() -> Outcome {
    let start = Instant::now();
    let e = |e: opcalc::WorkbenchError| e.to_string();
    let inner = chain_rule::inner_sweep(SeedStream::new(103), 50, 16, 5, 3).map_err(e)?;
    let inner_worst = max_of(inner.iter().map(|r| r.relative));
    let alg = TorusAlgebra::matrix(32, 1).map_err(|e| e.to_string())?;
    let torus = chain_rule::torus_sweep(&alg, SeedStream::new(104), 50, 4, 3, 3).map_err(e)?;
    let torus_worst = max_of(torus.iter().map(|r| r.relative));
    let mut weights = true;
    for k in 1..=6 {
        weights &= commutative_weight_identity(k).map_err(|e| e.to_string())?;
    }
    let ok = inner_worst <= 1e-12 && torus_worst <= 1e-9 && weights;
    let msg = format!(
        "inner {inner_worst:.2e} <= 1e-12, torus N=32 {torus_worst:.2e} <= 1e-9, weight identity k<=6 {}",
        if weights { "holds" } else { "fails" }
    );
    timed(Duration::from_secs(120), Ok((ok, msg)), start)
}

fn binned_moi() -> Outcome {
    let symbols: Vec<SmoothSymbol> =
        ["sin(2*x)", "exp(x)", "tanh(x)"].iter().map(|s| SmoothSymbol::parse(s)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let rows = moi::binned_convergence(&symbols, &[1, 2], SeedStream::new(105), 20, 6).map_err(|e| e.to_string())?;
    let lo = rows.iter().map(|r| r.slope).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.slope).fold(f64::NEG_INFINITY, f64::max);
    let ok = lo >= -1.3 && hi <= -0.7;
    Ok((ok, format!("{} seeded slopes in [{lo:.3}, {hi:.3}] within [-1.3, -0.7]", rows.len())))
}

fn doubling() -> Outcome {
    // oversampled lattice: N = 16 with resolution 64
    let alg = TorusAlgebra::matrix(16, 1).and_then(|a| a.with_oversampling(4)).map_err(|e| e.to_string())?;
    let s = doubling_sweep(&alg, SeedStream::new(106), 10_000, 4).map_err(|e| e.to_string())?;
    Ok((s.violations == 0 && s.tuples >= 10_000, format!("{} violations in {} tuples, worst ratio {:.4}", s.violations, s.tuples, s.worst)))
}

fn besov_bands() -> Outcome {
    let (_, rep) = run_config("besov-equivalence.toml")?;
    Ok(report_outcome(&rep, "band"))
}

fn heat() -> Outcome {
    let cfg = config("verify-core.toml")?;
    let base = store()?.get(cfg.hash(), cfg.experiment.name(), "heat.smoothing.max").map_err(|e| e.to_string())?;
    let alg = cfg.algebra(cfg.algebra.n[0]).map_err(|e| e.to_string())?;
    // a fresh draw from the committed run's distribution, held against its baseline
    let xs = ensemble(&alg, SeedStream::new(107), cfg.ensemble.size, cfg.ensemble.band, cfg.ensemble.decay);
    let h = heat_stats(&xs, 0.5, 1.5).map_err(|e| e.to_string())?;
    let ok = h.contraction <= 1.0 + 1e-11 && h.smoothing <= 1.1 * base;
    Ok((ok, format!("contraction {:.12} <= 1+1e-11, smoothing {:.4} <= 1.1 x {base:.4}", h.contraction, h.smoothing)))
}

fn meyer() -> Outcome {
    let (_, rep) = run_config("meyer.toml")?;
    Ok(report_outcome(&rep, "residual"))
}

fn nonlinear() -> Outcome {
    let (_, rep) = run_config("nonlinear-estimate.toml")?;
    Ok(report_outcome(&rep, "ratio"))
}

fn allen_cahn() -> Outcome {
    let start = Instant::now();
    let (_, rep) = run_config("allen-cahn.toml")?;
    timed(Duration::from_secs(300), Ok(report_outcome(&rep, "solver")), start)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("loewner", loewner),
        ("perturbation", perturbation),
        ("chain-rule", chain),
        ("binned-moi", binned_moi),
        ("doubling", doubling),
        ("besov-equivalence", besov_bands),
        ("heat", heat),
        ("meyer", meyer),
        ("nonlinear", nonlinear),
        ("allen-cahn", allen_cahn),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, msg) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2} {:<18} {}  {msg}", i + 1, name, if ok { "PASS" } else { "FAIL" });
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
