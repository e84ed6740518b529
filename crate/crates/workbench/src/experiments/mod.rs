//! Experiment implementations.
//!
//! Each experiment exposes its measurements as plain functions returning data, so the
//! acceptance suite can apply its own thresholds, and a `run` function that turns the
//! measurements into a [`Report`].

pub mod allen_cahn;
pub mod besov_equivalence;
pub mod chain_rule;
pub mod meyer;
pub mod moi;
pub mod nonlinear;
pub mod verify_core;

use opcalc_core::torus::{random_band_element, TorusAlgebra, TorusElement};
use rayon::prelude::*;

use crate::baseline::BaselineStore;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::report::Report;
use crate::seeds::SeedStream;

/// Whether a run compares against the baseline or records it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Check,
    Capture,
}

pub struct Context<'a> {
    pub seeds: SeedStream,
    pub baselines: &'a BaselineStore,
    pub mode: Mode,
}

impl Context<'_> {
    /// Baseline constant `name` of `cfg`; only meaningful in [`Mode::Check`].
    pub fn baseline(&self, cfg: &ExperimentConfig, name: &str) -> Result<f64> {
        self.baselines.get(cfg.hash(), cfg.experiment.name(), name)
    }
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Report> {
    match cfg.experiment {
        ExperimentKind::VerifyCore => verify_core::run(cfg, ctx),
        ExperimentKind::Moi => moi::run(cfg, ctx),
        ExperimentKind::ChainRule => chain_rule::run(cfg, ctx),
        ExperimentKind::BesovEquivalence => besov_equivalence::run(cfg, ctx),
        ExperimentKind::NonlinearEstimate => nonlinear::run(cfg, ctx),
        ExperimentKind::Meyer => meyer::run(cfg, ctx),
        ExperimentKind::AllenCahn => allen_cahn::run(cfg, ctx),
    }
}

/// Hermitian band-limited elements; member `i` draws from `seeds.child(i)`.
///
/// The draw depends only on the band, so the same member is the same element at every `N`
/// with `N/2 > band`.
pub fn ensemble(alg: &TorusAlgebra, seeds: SeedStream, size: usize, band: i64, decay: f64) -> Vec<TorusElement> {
    (0..size)
        .into_par_iter()
        .map(|i| random_band_element(alg, &mut seeds.child(i as u64).rng(), band, decay, true))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let xs = [10.0, 20.0, 40.0, 80.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.0)).collect();
        assert!((log_log_slope(&xs, &ys) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ensemble_members_do_not_depend_on_n() {
        let s = SeedStream::new(5);
        let a = ensemble(&TorusAlgebra::matrix(8, 1).unwrap(), s, 3, 3, 0.5);
        let b = ensemble(&TorusAlgebra::matrix(16, 1).unwrap(), s, 3, 3, 0.5);
        for (x, y) in a.iter().zip(&b) {
            for k in x.algebra().modes() {
                assert_eq!(x.coeff(k), y.coeff(k));
            }
        }
    }
}
