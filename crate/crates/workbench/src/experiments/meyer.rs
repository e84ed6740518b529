//! Residual of the telescoped decomposition of `e^{iξu} − 1` over Littlewood–Paley partial sums.

use opcalc_core::besov::meyer_residual;
use opcalc_core::torus::TorusElement;
use rayon::prelude::*;

use super::{ensemble, max_of, Context};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{num, Check, Report, Table};

pub const XIS: [f64; 3] = [0.5, 1.0, 2.0];
pub const QUADRATURE_NODES: usize = 32;

/// `residuals[i][e]` for `ξ = xis[i]` and ensemble member `e`.
pub fn residuals(xs: &[TorusElement], xis: &[f64], nodes: usize) -> Result<Vec<Vec<f64>>> {
    xis.iter().map(|&xi| xs.par_iter().map(|u| Ok(meyer_residual(u, xi, nodes)?)).collect()).collect()
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Report> {
    let mut rep = Report::default();
    let mut t = Table::new(&["n", "xi", "member", "residual"]);
    for &n in &cfg.algebra.n {
        let alg = cfg.algebra(n)?;
        let xs = ensemble(&alg, ctx.seeds.child(n as u64), cfg.ensemble.size, cfg.ensemble.band, cfg.ensemble.decay);
        for (xi, r) in XIS.iter().zip(residuals(&xs, &XIS, QUADRATURE_NODES)?) {
            for (e, v) in r.iter().enumerate() {
                t.push(vec![n.to_string(), num(*xi), e.to_string(), num(*v)]);
            }
            rep.check(Check::at_most(format!("residual.n{n}.xi{xi}"), max_of(r), 1e-8));
        }
    }
    rep.table("residuals", t);
    Ok(rep)
}
