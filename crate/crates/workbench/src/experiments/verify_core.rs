//! Identity checks across the core: eigensolver, Schatten norms, divided differences,
//! operator integrals, torus algebra, translations, heat flow and the doubling property.

use opcalc_core::besov::{doubling_check, heat_smoothing_check};
use opcalc_core::corpus::{random_hermitian, random_matrix, random_unitary};
use opcalc_core::linalg::{schatten_norm, HermitianOperator, Matrix, SchattenIndex, TraceMode};
use opcalc_core::moi::{homomorphism_commutation_residual, loewner_residual, perturbation_residual, MoiOperands};
use opcalc_core::symbol::{divided_diff, factorial, SmoothSymbol};
use opcalc_core::torus::{MulMode, TorusAlgebra, TorusElement};
use rand::Rng;
use rayon::prelude::*;

use super::{ensemble, max_of, Context, Mode};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{num, Check, Report, Table};
use crate::seeds::SeedStream;

const PS: [SchattenIndex; 3] = [SchattenIndex::ONE, SchattenIndex::TWO, SchattenIndex::INFINITY];

fn p_name(p: SchattenIndex) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{}", p.value())
    }
}

/// Random real polynomial of the given degree with standard normal coefficients.
pub fn random_polynomial<R: Rng + ?Sized>(rng: &mut R, degree: usize) -> SmoothSymbol {
    let c: Vec<f64> = (0..=degree).map(|_| opcalc_core::corpus::gaussian(rng)).collect();
    SmoothSymbol::polynomial_from(&c)
}

/// Largest relative Löwner residual per symbol family.
#[derive(Debug, Clone, PartialEq)]
pub struct LoewnerSweep {
    pub polynomial: f64,
    /// `(label, max relative residual)` for each smooth symbol.
    pub smooth: Vec<(String, f64)>,
    pub pairs: usize,
}

/// `pairs` seeded Hermitian pairs with dimensions cycling through `1..=max_dim`.
pub fn loewner_sweep(seeds: SeedStream, pairs: usize, max_dim: usize, max_degree: usize) -> Result<LoewnerSweep> {
    let smooth = ["exp(x)", "sin(x)", "tanh(x)"];
    let rows: Vec<(f64, Vec<f64>)> = (0..pairs)
        .into_par_iter()
        .map(|i| -> Result<(f64, Vec<f64>)> {
            let mut r = seeds.child(i as u64).rng();
            let n = 1 + i % max_dim;
            let x = random_hermitian(&mut r, n, 1.0);
            let y = random_hermitian(&mut r, n, 1.0);
            let f = random_polynomial(&mut r, 1 + i % max_degree);
            let poly = loewner_residual(&f, &x, &y, SchattenIndex::TWO)?.relative();
            let mut s = Vec::new();
            for src in smooth {
                let g = SmoothSymbol::parse(src)?;
                s.push(loewner_residual(&g, &x, &y, SchattenIndex::TWO)?.relative());
            }
            Ok((poly, s))
        })
        .collect::<Result<_>>()?;
    Ok(LoewnerSweep {
        polynomial: max_of(rows.iter().map(|r| r.0)),
        smooth: smooth.iter().enumerate().map(|(j, s)| (s.to_string(), max_of(rows.iter().map(|r| r.1[j])))).collect(),
        pairs,
    })
}

/// Largest relative perturbation-formula residual for each `(order n, slot)`.
pub fn perturbation_sweep(seeds: SeedStream, count: usize, max_dim: usize) -> Result<Vec<((usize, usize), f64)>> {
    let mut cases = Vec::new();
    for n in 1..=2usize {
        for slot in 1..=n + 1 {
            cases.push((n, slot));
        }
    }
    cases
        .iter()
        .enumerate()
        .map(|(c, &(n, slot))| {
            let worst: Vec<f64> = (0..count)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let mut r = seeds.at(&[c as u64, i as u64]).rng();
                    let dim = 1 + i % max_dim;
                    let f = random_polynomial(&mut r, 2 + i % 5);
                    let a = random_hermitian(&mut r, dim, 1.0);
                    let b = random_hermitian(&mut r, dim, 1.0);
                    let others: Vec<HermitianOperator> = (0..n).map(|_| random_hermitian(&mut r, dim, 1.0)).collect();
                    let args: Vec<Matrix> = (0..n).map(|_| random_matrix(&mut r, dim, 1.0)).collect();
                    Ok(perturbation_residual(&f, slot, &a, &b, &others, &args, SchattenIndex::TWO)?.relative())
                })
                .collect::<Result<_>>()?;
            Ok(((n, slot), max_of(worst)))
        })
        .collect()
}

/// Counts tuples violating `‖Δ_h^m x‖_p ≤ 2^m ‖Δ_{h/2}^m x‖_p · slack`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingSweep {
    pub tuples: usize,
    pub violations: usize,
    /// Largest `lhs / rhs`.
    pub worst: f64,
}

/// Doubling tuples on `alg` with lattice steps `h = 2·(2π/M)·j`, `m ≤ 3`, `p ∈ {1, 2, ∞}`.
pub fn doubling_sweep(alg: &TorusAlgebra, seeds: SeedStream, tuples: usize, band: i64) -> Result<DoublingSweep> {
    let res = alg.resolution() as i64;
    let unit = 2.0 * std::f64::consts::PI / res as f64;
    let per_element = 50;
    let elements = tuples.div_ceil(per_element);
    let out: Vec<(usize, usize, f64)> = (0..elements)
        .into_par_iter()
        .map(|e| -> Result<(usize, usize, f64)> {
            let s = seeds.child(e as u64);
            let mut r = s.rng();
            let decay = r.gen_range(0.0..2.0);
            let x = opcalc_core::torus::random_band_element(alg, &mut r, band, decay, true);
            let (mut count, mut bad, mut worst) = (0, 0, 0.0f64);
            for _ in 0..per_element.min(tuples - e * per_element) {
                let j: Vec<f64> =
                    (0..alg.d()).map(|_| (2 * r.gen_range(-res / 4..=res / 4)) as f64 * unit).collect();
                let m = r.gen_range(1..=3u32);
                let p = PS[r.gen_range(0..3)];
                let rep = doubling_check(&x, &j, m, p)?;
                count += 1;
                if !rep.pass {
                    bad += 1;
                }
                if rep.rhs > 0.0 {
                    worst = worst.max(rep.lhs / rep.rhs);
                }
            }
            Ok((count, bad, worst))
        })
        .collect::<Result<_>>()?;
    Ok(DoublingSweep {
        tuples: out.iter().map(|o| o.0).sum(),
        violations: out.iter().map(|o| o.1).sum(),
        worst: max_of(out.iter().map(|o| o.2)),
    })
}

/// Heat-flow measurements over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatStats {
    /// `max ‖e^{tΔ}x‖_p / ‖x‖_p`.
    pub contraction: f64,
    /// `max sup_t ‖e^{tΔ}x‖_{B^r} / ((1 + t^{(s−r)/2})‖x‖_{B^s})`.
    pub smoothing: f64,
}

pub const HEAT_TIMES: [f64; 6] = [0.001, 0.01, 0.1, 0.5, 1.0, 2.0];

pub fn heat_stats(elements: &[TorusElement], s: f64, r: f64) -> Result<HeatStats> {
    let rows: Vec<(f64, f64)> = elements
        .par_iter()
        .map(|x| -> Result<(f64, f64)> {
            let mut c = 0.0f64;
            let mut sm = 0.0f64;
            for p in PS {
                let base = x.lp_norm(p)?;
                for t in HEAT_TIMES {
                    c = c.max(x.heat(t)?.lp_norm(p)? / base);
                }
                sm = sm.max(heat_smoothing_check(x, s, r, p, SchattenIndex::TWO, &HEAT_TIMES)?);
            }
            Ok((c, sm))
        })
        .collect::<Result<_>>()?;
    Ok(HeatStats { contraction: max_of(rows.iter().map(|r| r.0)), smoothing: max_of(rows.iter().map(|r| r.1)) })
}

fn rel(a: &TorusElement, b: &TorusElement) -> Result<f64> {
    let scale = a.l2().max(b.l2()).max(f64::MIN_POSITIVE);
    Ok(a.sub(b)?.l2() / scale)
}

fn torus_checks(cfg: &ExperimentConfig, ctx: &Context, rep: &mut Report) -> Result<()> {
    let n = cfg.algebra.n[0];
    let alg = cfg.algebra(n)?;
    let seeds = ctx.seeds.child(100);
    // band kept at N/4 so checked products stay inside the lattice
    let small = ensemble(&alg, seeds.child(0), cfg.ensemble.size, (n as i64 / 4 - 1).max(1), cfg.ensemble.decay);
    let (mut assoc, mut anti, mut cyc, mut leib0, mut leib1, mut herm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for w in small.windows(3) {
        let (x, y, z) = (&w[0], &w[1], &w[2]);
        let xy = x.multiply(y, MulMode::Wrap)?;
        let yz = y.multiply(z, MulMode::Wrap)?;
        assoc = assoc.max(rel(&xy.multiply(z, MulMode::Wrap)?, &x.multiply(&yz, MulMode::Wrap)?)?);
        anti = anti.max(rel(&xy.adjoint(), &y.adjoint().multiply(&x.adjoint(), MulMode::Wrap)?)?);
        let yx = y.multiply(x, MulMode::Wrap)?;
        cyc = cyc.max((xy.trace() - yx.trace()).norm() / (1.0 + xy.trace().norm()));
        let xyc = x.multiply(y, MulMode::Checked)?;
        for (j, slot) in [(0usize, &mut leib0), (1, &mut leib1)] {
            if j < alg.d() {
                let lhs = xyc.derive(j);
                let rhs = x.derive(j).multiply(y, MulMode::Checked)?.add(&x.multiply(&y.derive(j), MulMode::Checked)?)?;
                *slot = slot.max(rel(&lhs, &rhs)?);
            }
        }
        let f = SmoothSymbol::parse("tanh(x)")?;
        let fx = x.apply_symbol(&f)?;
        herm = herm.max(fx.hermitian_defect() / (1.0 + fx.max_coeff()));
    }
    rep.check(Check::at_most("torus.associativity", assoc, 1e-12));
    rep.check(Check::at_most("torus.adjoint_reverses_products", anti, 1e-12));
    rep.check(Check::at_most("torus.trace_cyclic", cyc, 1e-12));
    rep.check(Check::at_most("torus.leibniz_axis0", leib0, 1e-12));
    rep.check(Check::at_most("torus.leibniz_axis1", leib1, 1e-12));
    rep.check(Check::at_most("torus.functional_calculus_hermitian", herm, 1e-11));

    // at θ = 0 the twisted convolution is the pointwise grid product
    let flat = TorusAlgebra::commutative(alg.d(), n)?;
    let fe = ensemble(&flat, seeds.child(1), 4, n as i64 / 2 - 1, cfg.ensemble.decay);
    let mut grid = 0.0f64;
    for w in fe.windows(2) {
        grid = grid.max(rel(&w[0].multiply(&w[1], MulMode::Wrap)?, &w[0].multiply_backend(&w[1])?)?);
    }
    rep.check(Check::at_most("torus.flat_matches_grid_product", grid, 1e-12));

    let xs = ensemble(&alg, seeds.child(2), cfg.ensemble.size, cfg.ensemble.band, cfg.ensemble.decay);
    let unit = 2.0 * std::f64::consts::PI / alg.resolution() as f64;
    for p in PS {
        let mut worst = 0.0f64;
        for (i, x) in xs.iter().enumerate() {
            let shift: Vec<f64> = (0..alg.d()).map(|a| unit * (3 * i + a + 1) as f64).collect();
            let base = x.lp_norm(p)?;
            worst = worst.max((x.translate(&shift).lp_norm(p)? - base).abs() / base);
        }
        rep.check(Check::at_most(format!("torus.lattice_translation_isometry.p{}", p_name(p)), worst, 1e-10));
    }
    let mut semigroup = 0.0f64;
    for x in &xs {
        semigroup = semigroup.max(rel(&x.heat(0.3)?.heat(0.2)?, &x.heat(0.5)?)?);
    }
    rep.check(Check::at_most("heat.semigroup", semigroup, 1e-13));

    let heat = heat_stats(&xs, 0.5, 1.5)?;
    rep.check(Check::at_most("heat.contraction", heat.contraction, 1.0 + 1e-11));
    rep.constants.insert("heat.smoothing.max".into(), heat.smoothing);
    if ctx.mode == Mode::Check {
        let base = ctx.baseline(cfg, "heat.smoothing.max")?;
        rep.check(Check::at_most("heat.smoothing_vs_baseline", heat.smoothing, 1.1 * base));
    }

    let over = alg.with_oversampling(2)?;
    for p in PS {
        let mut bad = 0usize;
        let mut worst = 0.0f64;
        for (e, x) in xs.iter().enumerate() {
            let y = x.with_oversampling(2)?;
            let r = over.resolution() as f64;
            for m in 1..=3u32 {
                let h: Vec<f64> = (0..alg.d()).map(|a| 2.0 * (e + a + m as usize) as f64 * 2.0 * std::f64::consts::PI / r).collect();
                let d = doubling_check(&y, &h, m, p)?;
                bad += usize::from(!d.pass);
                if d.rhs > 0.0 {
                    worst = worst.max(d.lhs / d.rhs);
                }
            }
        }
        rep.check(Check::at_most(format!("doubling.violations.p{}", p_name(p)), bad as f64, 0.0));
        rep.info.insert(format!("doubling.worst_ratio.p{}", p_name(p)), num(worst));
    }
    Ok(())
}

fn linalg_checks(seeds: SeedStream, rep: &mut Report) -> Result<()> {
    for (i, n) in [1usize, 2, 5, 8, 16].into_iter().enumerate() {
        let mut r = seeds.child(i as u64).rng();
        let h = random_hermitian(&mut r, n, 1.0);
        rep.check(Check::at_most(format!("eig.reconstruction.n{n}"), h.eig().residual(h.matrix()), 1e-12));
    }
    let mut r = seeds.child(10).rng();
    let a = random_matrix(&mut r, 8, 1.0);
    let b = random_matrix(&mut r, 8, 1.0);
    let u = random_unitary(&mut r, 8);
    let fro = a.frobenius_norm() / (8f64).sqrt();
    let s2 = schatten_norm(&a, SchattenIndex::TWO, TraceMode::Normalized);
    rep.check(Check::at_most("schatten.two_is_frobenius", (s2 - fro).abs() / fro, 1e-12));
    for p in PS {
        let n0 = schatten_norm(&a, p, TraceMode::Normalized);
        let n1 = schatten_norm(&u.matmul(&a).matmul(&u.adjoint()), p, TraceMode::Normalized);
        rep.check(Check::at_most(format!("schatten.unitary_invariance.p{}", p_name(p)), (n0 - n1).abs() / n0, 1e-12));
    }
    let lhs = schatten_norm(&a.matmul(&b), SchattenIndex::ONE, TraceMode::Counting);
    let rhs = schatten_norm(&a, SchattenIndex::TWO, TraceMode::Counting) * schatten_norm(&b, SchattenIndex::TWO, TraceMode::Counting);
    rep.check(Check::at_most("schatten.hoelder", lhs / rhs, 1.0 + 1e-12));
    Ok(())
}

fn symbol_checks(seeds: SeedStream, rep: &mut Report) -> Result<()> {
    let mut r = seeds.rng();
    for src in ["exp(x)", "sin(x)", "x^4 - 2*x"] {
        let f = SmoothSymbol::parse(src)?;
        let mut worst = 0.0f64;
        for n in 1..=3usize {
            let x: f64 = r.gen_range(-1.0..1.0);
            let dd = divided_diff(&f, &vec![x; n + 1])?;
            let want = f.derivative(n, x)? / factorial(n);
            worst = worst.max((dd - want).norm() / (1.0 + want.norm()));
        }
        rep.check(Check::at_most(format!("divided.coincident.{src}"), worst, 1e-10));
    }
    let f = SmoothSymbol::parse("exp(x)*sin(x)")?;
    let nodes = [0.3, -0.7, 1.1, 0.05];
    let base = divided_diff(&f, &nodes)?;
    let mut worst = 0.0f64;
    for perm in [[1, 0, 2, 3], [3, 2, 1, 0], [2, 3, 0, 1]] {
        let p: Vec<f64> = perm.iter().map(|&i| nodes[i]).collect();
        worst = worst.max((divided_diff(&f, &p)? - base).norm());
    }
    rep.check(Check::at_most("divided.symmetric", worst, 1e-12));
    // recursive definition from the node list
    let lo = divided_diff(&f, &nodes[..3])?;
    let hi = divided_diff(&f, &nodes[1..])?;
    let rec = (hi - lo) / (nodes[3] - nodes[0]);
    rep.check(Check::at_most("divided.recursion", (rec - base).norm() / (1.0 + base.norm()), 1e-10));
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Report> {
    let mut rep = Report::default();
    linalg_checks(ctx.seeds.child(0), &mut rep)?;
    symbol_checks(ctx.seeds.child(1), &mut rep)?;

    let lw = loewner_sweep(ctx.seeds.child(2), 20, 16, 6)?;
    rep.check(Check::at_most("loewner.polynomial", lw.polynomial, 1e-11));
    for (name, v) in &lw.smooth {
        rep.check(Check::at_most(format!("loewner.{name}"), *v, 1e-8));
    }
    for ((n, slot), v) in perturbation_sweep(ctx.seeds.child(3), 10, 8)? {
        rep.check(Check::at_most(format!("perturbation.n{n}.slot{slot}"), v, 1e-11));
    }
    let mut r = ctx.seeds.child(4).rng();
    let anchors: Vec<HermitianOperator> = (0..3).map(|_| random_hermitian(&mut r, 6, 1.0)).collect();
    let args: Vec<Matrix> = (0..2).map(|_| random_matrix(&mut r, 6, 1.0)).collect();
    let w = random_unitary(&mut r, 6);
    let hc = homomorphism_commutation_residual(&SmoothSymbol::parse("exp(x)")?, &w, &MoiOperands::new(anchors, args)?, SchattenIndex::TWO)?;
    rep.check(Check::at_most("moi.unitary_covariance", hc.relative(), 1e-10));

    torus_checks(cfg, ctx, &mut rep)?;

    let mut t = Table::new(&["check", "value"]);
    for c in &rep.checks {
        t.push(vec![c.name.clone(), num(c.value)]);
    }
    rep.table("values", t);
    Ok(rep)
}
