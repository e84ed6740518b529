//! Mild solutions of `∂_t u = Δu + F(u)` on the torus: oracles, contraction, smoothing and
//! the Grönwall envelope.
//!
//! The constants `C` and `C_p` of the contraction time are the largest boundedness and
//! Lipschitz ratios of the configured symbols over the ensemble, each divided by the matching
//! norm of the symbol. A baseline capture records them; a check reads them back.

use opcalc_core::allen_cahn::{
    commutative_cross_check, contraction_time, evolve, global_existence_check, picard_solve, smoothing_report,
    strong_residual, ACProblem, ContractionConstants, InitialIterate, Trajectory,
};
use opcalc_core::besov::{besov_multiplier_norm, boundedness_ratio, lipschitz_besov_ratio, BesovIndex};
use opcalc_core::linalg::SchattenIndex;
use opcalc_core::symbol::{cb_norm, lipschitz_norm, sup_norm, SmoothSymbol, Window};
use opcalc_core::torus::{Backend, TorusAlgebra, TorusElement};
use opcalc_core::C64;
use rayon::prelude::*;

use super::{ensemble, max_of, Context, Mode};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{num, Check, Report, Table};
use crate::snapshot::write_snapshot;

/// Lipschitz window of the Grönwall check; wide enough for unit-`L₂` data.
pub const LIPSCHITZ_WINDOW: f64 = 8.0;

fn unit(x: TorusElement) -> TorusElement {
    let n = x.l2();
    if n == 0.0 {
        x
    } else {
        x.scale(C64::new(1.0 / n, 0.0))
    }
}

fn cb(f: &SmoothSymbol, order: usize, w: &Window) -> Result<f64> {
    Ok(sup_norm(f, w).max(cb_norm(f, order, w)?))
}

/// `C = max ‖F(u)‖_B / (‖F‖_{C_b^n}‖u‖_B)` and `C_p = max ‖F(u) − F(v)‖_B / (Lip(F)‖u − v‖_B)`
/// over `xs` and consecutive pairs, maximized over the symbols.
pub fn measure_constants(symbols: &[SmoothSymbol], xs: &[TorusElement], idx: &BesovIndex) -> Result<ContractionConstants> {
    let order = (idx.s.ceil() as usize).max(1);
    let mut c = 0.0f64;
    let mut c_p = 0.0f64;
    for f in symbols {
        let rows: Vec<(f64, f64)> = (0..xs.len())
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let u = &xs[i];
                let w = Window::symmetric(u.lp_norm(SchattenIndex::INFINITY)?);
                let norm = cb(f, order.min(f.max_order()), &w)?;
                let b = if norm > 0.0 { boundedness_ratio(f, u, idx)? / norm } else { 0.0 };
                let l = if i == 0 {
                    0.0
                } else {
                    let v = &xs[i - 1];
                    let r = u.lp_norm(SchattenIndex::INFINITY)?.max(v.lp_norm(SchattenIndex::INFINITY)?);
                    let lip = lipschitz_norm(f, &Window::symmetric(r));
                    if lip > 0.0 {
                        lipschitz_besov_ratio(f, u, v, idx)? / lip
                    } else {
                        0.0
                    }
                };
                Ok((b, l))
            })
            .collect::<Result<_>>()?;
        c = c.max(max_of(rows.iter().map(|r| r.0)));
        c_p = c_p.max(max_of(rows.iter().map(|r| r.1)));
    }
    Ok(ContractionConstants { c, c_p })
}

/// (a) `max_t ‖u(t) − e^{tΔ}u₀‖₂ / ‖u₀‖₂` for `F ≡ 0`.
pub fn heat_flow_deviation(u0: &TorusElement, t_max: f64, dt: f64, k: ContractionConstants) -> Result<f64> {
    let p = ACProblem::new(u0.clone(), SmoothSymbol::parse("0")?, 0.5, 2.0, t_max, dt)?.with_constants(k);
    let traj = evolve(&p)?;
    deviation_from(&traj, |t| u0.heat(t)).map(|d| d / u0.l2().max(f64::MIN_POSITIVE))
}

fn deviation_from(traj: &Trajectory, exact: impl Fn(f64) -> opcalc_core::Result<TorusElement>) -> Result<f64> {
    let mut worst = 0.0f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        worst = worst.max(s.sub(&exact(*t)?)?.l2());
    }
    Ok(worst)
}

/// (b) `max_t ‖u(t) − u_exact(t)‖₂` for `F(x) = c·x`, where each mode evolves by `e^{(c−|k|²)t}`.
pub fn linear_deviation(u0: &TorusElement, c: f64, t_max: f64, dt: f64, k: ContractionConstants) -> Result<f64> {
    let p = ACProblem::new(u0.clone(), SmoothSymbol::parse(&format!("{c:?}*x"))?, 0.5, 2.0, t_max, dt)?.with_constants(k);
    let traj = evolve(&p)?;
    deviation_from(&traj, |t| Ok(u0.multiplier(|m| C64::new(((c - (m[0] * m[0] + m[1] * m[1]) as f64) * t).exp(), 0.0))))
}

/// Contraction factors at multiples of `T = contraction_time` from both initial iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionRow {
    pub member: usize,
    pub multiple: f64,
    pub time: f64,
    /// `None` when the Picard solve refused (no contraction or ball violation).
    pub frozen: Option<f64>,
    pub heat: Option<f64>,
    /// Sup-in-time `L₂` distance of the two fixed points over `tol · max ‖u‖₂`.
    pub uniqueness: Option<f64>,
}

pub fn contraction_rows(problem: &ACProblem, xs: &[TorusElement], multiples: &[f64]) -> Result<Vec<ContractionRow>> {
    let rows: Vec<Vec<ContractionRow>> = xs
        .par_iter()
        .enumerate()
        .map(|(member, u)| -> Result<Vec<ContractionRow>> {
            let mut p = problem.clone();
            p.u0 = u.clone();
            let t = contraction_time(&p, u)?;
            multiples
                .iter()
                .map(|&m| {
                    let len = (m * t).min(p.t_max.max(p.dt));
                    let a = picard_solve(&p, u, 0.0, len, InitialIterate::Frozen).ok();
                    let b = picard_solve(&p, u, 0.0, len, InitialIterate::HeatFlow).ok();
                    let uniqueness = match (&a, &b) {
                        (Some((sa, _)), Some((sb, _))) => {
                            let mut d = 0.0f64;
                            let mut scale = 0.0f64;
                            for (x, y) in sa.states.iter().zip(&sb.states) {
                                d = d.max(x.sub(y)?.l2());
                                scale = scale.max(x.l2());
                            }
                            Some(d / (p.tol * scale.max(f64::MIN_POSITIVE)))
                        }
                        _ => None,
                    };
                    Ok(ContractionRow {
                        member,
                        multiple: m,
                        time: len,
                        frozen: a.map(|r| r.1.factor),
                        heat: b.map(|r| r.1.factor),
                        uniqueness,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// (d) Largest interior strong residual on `[t_min, t_max]` at `dt` and `dt/2`.
pub fn strong_residual_refinement(u0: &TorusElement, f: &SmoothSymbol, t_max: f64, dt: f64, t_min: f64, k: ContractionConstants) -> Result<(f64, f64)> {
    let mut out = [0.0f64; 2];
    for (slot, h) in out.iter_mut().zip([dt, dt / 2.0]) {
        let p = ACProblem::new(u0.clone(), f.clone(), 0.5, 2.0, t_max, h)?.with_constants(k);
        let traj = evolve(&p)?;
        *slot = max_of(strong_residual(&traj, &p, t_min)?.iter().map(|r| r.value));
    }
    Ok((out[0], out[1]))
}

/// (f) Matrix against grid solver at `θ = 0`.
pub fn cross_check(u0: &TorusElement, f: &SmoothSymbol, t_max: f64, dt: f64, k: ContractionConstants) -> Result<f64> {
    let p = ACProblem::new(u0.clone(), f.clone(), 0.5, 2.0, t_max, dt)?.with_constants(k);
    Ok(commutative_cross_check(&p)?)
}

pub const ALPHAS: [f64; 4] = [0.5, 1.0, 1.5, 1.9];

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Report> {
    let mut rep = Report::default();
    let n = cfg.algebra.n[0];
    let alg = cfg.algebra(n)?;
    let s = cfg.besov.s[0];
    let p = cfg.besov.p[0].0;
    let idx = BesovIndex { s, p, q: SchattenIndex::TWO };
    let symbols = cfg.symbols();
    let xs: Vec<TorusElement> =
        ensemble(&alg, ctx.seeds.child(0), cfg.ensemble.size, cfg.ensemble.band, cfg.ensemble.decay).into_iter().map(unit).collect();

    let measured = measure_constants(&symbols, &xs, &idx)?;
    rep.constants.insert("c".into(), measured.c);
    rep.constants.insert("c_p".into(), measured.c_p);
    let k = match ctx.mode {
        Mode::Capture => measured,
        Mode::Check => ContractionConstants { c: ctx.baseline(cfg, "c")?, c_p: ctx.baseline(cfg, "c_p")? },
    };
    rep.info.insert("constants".into(), format!("c={} c_p={}", num(k.c), num(k.c_p)));

    // (a) and (b) on the first member
    let u0 = &xs[0];
    rep.check(Check::at_most("heat_flow", heat_flow_deviation(u0, 0.5, cfg.solver.dt, k)?, 1e-10));
    rep.check(Check::at_most("linear_closed_form", linear_deviation(u0, 0.5, 0.5, 1e-3, k)?, 1e-8));

    // (c) contraction at T, 2T, 4T; only T is asserted
    let base = ACProblem::new(u0.clone(), symbols[0].clone(), s, p.value(), cfg.solver.t_max, cfg.solver.dt)?.with_constants(k);
    let mut base = base;
    base.delta = cfg.solver.delta;
    let rows = contraction_rows(&base, &xs, &[1.0, 2.0, 4.0])?;
    let mut ct = Table::new(&["member", "multiple", "time", "factor_frozen", "factor_heat", "uniqueness"]);
    let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "refused".into());
    for r in &rows {
        ct.push(vec![r.member.to_string(), num(r.multiple), num(r.time), opt(r.frozen), opt(r.heat), opt(r.uniqueness)]);
    }
    rep.table("contraction_factors", ct);
    let at_t: Vec<&_> = rows.iter().filter(|r| r.multiple == 1.0).collect();
    let factor = at_t.iter().map(|r| r.frozen.unwrap_or(f64::INFINITY).max(r.heat.unwrap_or(f64::INFINITY))).fold(0.0, f64::max);
    rep.check(Check::at_most("contraction_factor_at_T", factor, 1.0 - 1e-12));
    let uniq = at_t.iter().map(|r| r.uniqueness.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    rep.check(Check::at_most("uniqueness_over_tol", uniq, 10.0));

    // (d)
    let small = unit(ensemble(&alg, ctx.seeds.child(1), 1, 1, cfg.ensemble.decay).remove(0)).scale(C64::new(0.5, 0.0));
    let (r1, r2) = strong_residual_refinement(&small, &symbols[0], 0.2, 2e-3, 0.05, k)?;
    rep.info.insert("strong_residual".into(), format!("{} {}", num(r1), num(r2)));
    rep.check(Check::at_least("strong_residual_refinement", r1 / r2, 3.0));

    // (e) and the main trajectory
    let mut main = base.clone();
    main.t_max = cfg.solver.t_max;
    let traj = evolve(&main)?;
    let g = global_existence_check(&main, &Window::symmetric(LIPSCHITZ_WINDOW))?;
    rep.check(Check::holds("reached_t_max", g.reached_t_max));
    rep.check(Check::holds("no_blow_up", g.blow_up.is_none()));
    rep.check(Check::at_most("gronwall_envelope", g.envelope_ratio, 1.0 + 1e-10));

    let every = main.checkpoint_every.max(1);
    let picks: Vec<usize> = (0..traj.times.len()).filter(|i| i % every == 0 || *i == traj.times.len() - 1).collect();
    let sm = smoothing_report(&traj, &ALPHAS, p, &picks)?;
    let mut tt = Table::new(&["time", "besov_0.5", "besov_1", "besov_1.5", "besov_1.9", "top_block_ratio", "heat_deviation", "blow_up"]);
    let mut worst_heat = 0.0f64;
    for (row, &i) in sm.iter().zip(&picks) {
        let dev = traj.states[i].sub(&u0.heat(row.time)?)?.l2();
        worst_heat = worst_heat.max(dev);
        let mut line = vec![num(row.time)];
        line.extend(row.norms.iter().map(|v| num(*v)));
        line.push(num(row.top_ratio));
        line.push(num(dev));
        line.push(traj.blow_up.map_or(0, |b| u8::from(b.time <= row.time)).to_string());
        tt.push(line);
    }
    rep.table("trajectory", tt);
    rep.info.insert("heat_flow_deviation".into(), num(worst_heat));
    let late: Vec<_> = sm.iter().filter(|r| r.time >= 10.0 * main.dt).collect();
    rep.check(Check::at_most("smoothing.top_block_ratio", late.iter().map(|r| r.top_ratio).fold(0.0, f64::max), 1.0));
    rep.check(Check::at_most(
        "smoothing.initial_row",
        (sm[0].norms[0] - besov_multiplier_norm(u0, &BesovIndex { s: ALPHAS[0], p, q: SchattenIndex::TWO })?).abs(),
        1e-12 * (1.0 + sm[0].norms[0]),
    ));

    if cfg.solver.snapshot_every > 0 {
        for i in (0..traj.times.len()).step_by(cfg.solver.snapshot_every) {
            rep.attachments.insert(format!("snapshots/state_{i:06}.txt"), write_snapshot(&traj.states[i], Some(traj.times[i])));
        }
    }

    // (f)
    let flat = TorusAlgebra::new(alg.d(), n, 0, Backend::Matrix)?;
    let fu = unit(ensemble(&flat, ctx.seeds.child(2), 1, 2, cfg.ensemble.decay).remove(0));
    let cross = cross_check(&fu, &SmoothSymbol::parse("x^3 - x")?, 0.2, cfg.solver.dt, k)?;
    rep.check(Check::at_most("commutative_cross_check", cross, 1e-8));
    Ok(rep)
}
