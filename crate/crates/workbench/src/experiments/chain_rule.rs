//! Chain-rule residuals for inner and torus derivations, and the expansion weight identity.

use opcalc_core::chain::{chain_rule_residual, commutative_weight_identity, expand, ChainOperand, DerivationSpec};
use opcalc_core::corpus::random_hermitian;
use opcalc_core::torus::{random_band_element, TorusAlgebra};
use rayon::prelude::*;

use super::verify_core::random_polynomial;
use super::{max_of, Context};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{num, Check, Report, Table};
use crate::seeds::SeedStream;

/// Every `β ∈ ℕ²` with `1 ≤ |β| ≤ max`.
pub fn multi_indices(max: u32) -> Vec<[u32; 2]> {
    let mut v = Vec::new();
    for total in 1..=max {
        for a in 0..=total {
            v.push([a, total - a]);
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub seed: usize,
    pub dim: usize,
    pub degree: usize,
    pub beta: [u32; 2],
    pub relative: f64,
}

/// Inner derivations `[D_j, ·]` on seeded Hermitian operands; dimensions cycle through
/// `2..=max_dim`, degrees through `1..=max_degree`.
pub fn inner_sweep(seeds: SeedStream, count: usize, max_dim: usize, max_degree: usize, max_order: u32) -> Result<Vec<ResidualRow>> {
    let rows: Vec<Vec<ResidualRow>> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<Vec<ResidualRow>> {
            let mut r = seeds.child(i as u64).rng();
            let dim = 2 + i % (max_dim - 1);
            let degree = 1 + i % max_degree;
            let f = random_polynomial(&mut r, degree);
            let u = ChainOperand::Operator(random_hermitian(&mut r, dim, 1.0));
            let der = DerivationSpec::Inner(vec![random_hermitian(&mut r, dim, 0.5), random_hermitian(&mut r, dim, 0.5)]);
            multi_indices(max_order)
                .into_iter()
                .map(|beta| {
                    let res = chain_rule_residual(&f, &u, &beta, &der)?;
                    Ok(ResidualRow { seed: i, dim, degree, beta, relative: res.relative() })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Fourier derivations on band-limited torus elements with polynomial symbols of degree
/// cycling through `1..=max_degree`.
pub fn torus_sweep(alg: &TorusAlgebra, seeds: SeedStream, count: usize, band: i64, max_degree: usize, max_order: u32) -> Result<Vec<ResidualRow>> {
    let rows: Vec<Vec<ResidualRow>> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<Vec<ResidualRow>> {
            let mut r = seeds.child(i as u64).rng();
            let degree = 1 + i % max_degree;
            let f = random_polynomial(&mut r, degree);
            let u = ChainOperand::Torus(random_band_element(alg, &mut r, band, 0.5, true));
            multi_indices(max_order)
                .into_iter()
                .map(|beta| {
                    let res = chain_rule_residual(&f, &u, &beta, &DerivationSpec::Torus)?;
                    Ok(ResidualRow { seed: i, dim: alg.n(), degree, beta, relative: res.relative() })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn rows_table(rows: &[ResidualRow]) -> Table {
    let mut t = Table::new(&["seed", "dim", "degree", "beta", "relative_residual"]);
    for r in rows {
        t.push(vec![r.seed.to_string(), r.dim.to_string(), r.degree.to_string(), format!("({},{})", r.beta[0], r.beta[1]), num(r.relative)]);
    }
    t
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Report> {
    let mut rep = Report::default();
    let count = cfg.ensemble.size;

    let inner = inner_sweep(ctx.seeds.child(0), count, 16, 5, 3)?;
    rep.check(Check::at_most("inner.polynomial", max_of(inner.iter().map(|r| r.relative)), 1e-12));
    rep.table("inner_residuals", rows_table(&inner));

    // smooth symbols: the truncated jets make this approximate, so only recorded
    let mut smooth = Vec::new();
    for (j, f) in cfg.symbols().iter().enumerate() {
        let mut r = ctx.seeds.at(&[1, j as u64]).rng();
        let u = ChainOperand::Operator(random_hermitian(&mut r, 6, 0.5));
        let der = DerivationSpec::Inner(vec![random_hermitian(&mut r, 6, 0.5), random_hermitian(&mut r, 6, 0.5)]);
        for beta in multi_indices(2) {
            smooth.push((f.label().to_string(), beta, chain_rule_residual(f, &u, &beta, &der)?.relative()));
        }
    }
    for f in cfg.symbols() {
        let worst = max_of(smooth.iter().filter(|s| s.0 == f.label()).map(|s| s.2));
        rep.info.insert(format!("inner.smooth.{}", f.label()), num(worst));
    }

    for &n in &cfg.algebra.n {
        let alg = cfg.algebra(n)?;
        // cubic products of band N/8 stay below the spectral-mass guard at 3N/8
        let band = cfg.ensemble.band.min(n as i64 / 8);
        let torus = torus_sweep(&alg, ctx.seeds.at(&[2, n as u64]), count, band, 3, 3)?;
        rep.check(Check::at_most(format!("torus.n{n}.band{band}"), max_of(torus.iter().map(|r| r.relative)), 1e-9));
        rep.table(&format!("torus_residuals_n{n}"), rows_table(&torus));
    }

    let mut w = Table::new(&["k", "terms", "identity"]);
    for k in 1..=6u32 {
        let ok = commutative_weight_identity(k)?;
        rep.check(Check::holds(format!("weights.k{k}"), ok));
        w.push(vec![k.to_string(), expand(&[k])?.len().to_string(), ok.to_string()]);
    }
    rep.table("weight_identity", w);
    Ok(rep)
}
