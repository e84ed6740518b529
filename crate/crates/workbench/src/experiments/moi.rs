//! Convergence of the binned operator-integral discretization towards the eigenprojection form.

use opcalc_core::corpus::{random_hermitian, random_matrix};
use opcalc_core::linalg::{schatten_norm, HermitianOperator, Matrix, SchattenIndex, TraceMode};
use opcalc_core::moi::{moi_binned, moi_schur, MoiOperands};
use opcalc_core::symbol::SmoothSymbol;
use rayon::prelude::*;

use super::{log_log_slope, Context};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{num, Check, Report, Table};
use crate::seeds::SeedStream;

pub const BIN_RESOLUTIONS: [u32; 5] = [10, 20, 40, 80, 160];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub symbol: String,
    pub order: usize,
    pub seed: usize,
    /// `‖S_{φ,m} − T_φ‖_2` for each entry of [`BIN_RESOLUTIONS`].
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// One row per `(symbol, order, seed)` on random `dim × dim` operands.
pub fn binned_convergence(
    symbols: &[SmoothSymbol],
    orders: &[usize],
    seeds: SeedStream,
    count: usize,
    dim: usize,
) -> Result<Vec<ConvergenceRow>> {
    let ms: Vec<f64> = BIN_RESOLUTIONS.iter().map(|&m| m as f64).collect();
    let mut jobs = Vec::new();
    for f in symbols {
        for &n in orders {
            for seed in 0..count {
                jobs.push((f, n, seed));
            }
        }
    }
    jobs.par_iter()
        .map(|&(f, n, seed)| {
            // operands depend on the seed only, so every symbol sees the same matrices
            let mut r = seeds.at(&[n as u64, seed as u64]).rng();
            let anchors: Vec<HermitianOperator> = (0..=n).map(|_| random_hermitian(&mut r, dim, 1.0)).collect();
            let args: Vec<Matrix> = (0..n).map(|_| random_matrix(&mut r, dim, 1.0)).collect();
            let ops = MoiOperands::new(anchors, args)?;
            let exact = moi_schur(f, &ops)?;
            let errors = BIN_RESOLUTIONS
                .iter()
                .map(|&m| Ok(schatten_norm(&(&moi_binned(f, &ops, m)? - &exact), SchattenIndex::TWO, TraceMode::Normalized)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(ConvergenceRow { symbol: f.label().to_string(), order: n, seed, slope: log_log_slope(&ms, &errors), errors })
        })
        .collect()
}

/// Slope of the geometric-mean error curve of a group of rows.
pub fn pooled_slope(rows: &[&ConvergenceRow]) -> f64 {
    let ms: Vec<f64> = BIN_RESOLUTIONS.iter().map(|&m| m as f64).collect();
    let k = rows.len() as f64;
    let mean: Vec<f64> =
        (0..ms.len()).map(|i| (rows.iter().map(|r| r.errors[i].ln()).sum::<f64>() / k).exp()).collect();
    log_log_slope(&ms, &mean)
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Report> {
    let mut rep = Report::default();
    let symbols = cfg.symbols();
    let rows = binned_convergence(&symbols, &[1, 2], ctx.seeds, cfg.ensemble.size, 6)?;

    let mut t = Table::new(&["symbol", "order", "seed", "m", "error"]);
    let mut s = Table::new(&["symbol", "order", "seed", "slope"]);
    for r in &rows {
        for (m, e) in BIN_RESOLUTIONS.iter().zip(&r.errors) {
            t.push(vec![r.symbol.clone(), r.order.to_string(), r.seed.to_string(), m.to_string(), num(*e)]);
        }
        s.push(vec![r.symbol.clone(), r.order.to_string(), r.seed.to_string(), num(r.slope)]);
    }
    rep.table("binned_errors", t);
    rep.table("binned_slopes", s);

    for f in &symbols {
        for n in [1usize, 2] {
            let group: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.symbol == f.label() && r.order == n).collect();
            let tag = format!("{}.order{n}", f.label());
            rep.check(Check::within(format!("slope.pooled.{tag}"), pooled_slope(&group), -1.3, -0.7));
            let lo = group.iter().map(|r| r.slope).fold(f64::INFINITY, f64::min);
            let hi = group.iter().map(|r| r.slope).fold(f64::NEG_INFINITY, f64::max);
            rep.check(Check::within(format!("slope.steepest_seed.{tag}"), lo, -1.3, -0.7));
            rep.check(Check::within(format!("slope.shallowest_seed.{tag}"), hi, -1.3, -0.7));
            // dyadic subsequence m, 2m, 4m: errors may not grow
            let grows = group.iter().filter(|r| r.errors.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12))).count();
            rep.info.insert(format!("non_monotone_seeds.{tag}"), grows.to_string());
        }
    }
    Ok(rep)
}
