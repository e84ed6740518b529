//! Ensemble ratios `‖F(u)‖_B / ‖u‖_B` and `‖F(u) − F(v)‖_B / ‖u − v‖_B`.

use opcalc_core::besov::{boundedness_ratio, lipschitz_besov_ratio, BesovIndex};
use opcalc_core::symbol::SmoothSymbol;
use opcalc_core::torus::TorusElement;
use rayon::prelude::*;

use super::{ensemble, max_of, Context, Mode};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{num, Check, Report, Table};

/// Boundedness ratios of `f` over an ensemble.
pub fn boundedness_ratios(f: &SmoothSymbol, xs: &[TorusElement], idx: &BesovIndex) -> Result<Vec<f64>> {
    xs.par_iter().map(|x| Ok(boundedness_ratio(f, x, idx)?)).collect()
}

/// Lipschitz ratios over consecutive ensemble pairs.
pub fn lipschitz_ratios(f: &SmoothSymbol, xs: &[TorusElement], idx: &BesovIndex) -> Result<Vec<f64>> {
    (1..xs.len()).into_par_iter().map(|i| Ok(lipschitz_besov_ratio(f, &xs[i - 1], &xs[i], idx)?)).collect()
}

fn tag(f: &SmoothSymbol, idx: &BesovIndex) -> String {
    let e = |p: opcalc_core::linalg::SchattenIndex| if p.is_infinite() { "inf".to_string() } else { format!("{}", p.value()) };
    format!("{}.s{}.p{}.q{}", f.label(), idx.s, e(idx.p), e(idx.q))
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Report> {
    let mut rep = Report::default();
    let mut hist = Table::new(&["symbol", "n", "s", "p", "q", "member", "boundedness", "lipschitz"]);
    let smallest = cfg.algebra.n.iter().copied().min().unwrap_or(8) as i64;
    // F(u) needs headroom above the band of u on the coarsest lattice, else its high modes
    // fold back and the coarse ratios come out low
    let band = cfg.ensemble.band.min(smallest / 4).max(1);
    let identity = SmoothSymbol::parse("x")?;
    for &s in &cfg.besov.s {
        for p in &cfg.besov.p {
            for q in &cfg.besov.q {
                let idx = BesovIndex { s, p: p.0, q: q.0 };
                for f in cfg.symbols() {
                    let mut prev: Option<(usize, f64)> = None;
                    for &n in &cfg.algebra.n {
                        let alg = cfg.algebra(n)?;
                        let xs = ensemble(&alg, ctx.seeds, cfg.ensemble.size, band, cfg.ensemble.decay);
                        let b = boundedness_ratios(&f, &xs, &idx)?;
                        let l = lipschitz_ratios(&f, &xs, &idx)?;
                        for (i, bi) in b.iter().enumerate() {
                            let li = if i == 0 { String::new() } else { num(l[i - 1]) };
                            hist.push(vec![
                                f.label().into(),
                                n.to_string(),
                                num(s),
                                num(p.0.value()),
                                num(q.0.value()),
                                i.to_string(),
                                num(*bi),
                                li,
                            ]);
                        }
                        let key = format!("{}.n{n}", tag(&f, &idx));
                        let bmax = max_of(b.iter().copied());
                        rep.constants.insert(format!("boundedness.{key}"), bmax);
                        rep.constants.insert(format!("lipschitz.{key}"), max_of(l.iter().copied()));
                        if ctx.mode == Mode::Check {
                            let base = ctx.baseline(cfg, &format!("boundedness.{key}"))?;
                            rep.check(Check::at_most(format!("boundedness_vs_baseline.{key}"), bmax, base));
                        }
                        if let Some((m, pm)) = prev {
                            rep.check(Check::at_most(format!("regression.{}.n{m}to{n}", tag(&f, &idx)), bmax / pm, 1.1));
                        }
                        prev = Some((n, bmax));
                        if f.label() == cfg.symbols()[0].label() {
                            let id = boundedness_ratios(&identity, &xs, &idx)?;
                            let worst = id.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
                            rep.check(Check::at_most(format!("identity.{}.n{n}", tag(&identity, &idx)), worst, 0.0));
                        }
                    }
                }
            }
        }
    }
    rep.table("ratios", hist);
    Ok(rep)
}
