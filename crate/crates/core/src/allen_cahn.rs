//! Mild solutions of `∂_t u = Δu + F(u)` on the torus model.
//!
//! Picard iteration runs on a uniform time grid per segment. The Duhamel integral is
//! integrated exactly against the heat kernel after interpolating `F(u(τ))` linearly in
//! time, so the stiff linear part never enters the quadrature error. Segment lengths come
//! from the contraction time; a failed contraction halves the segment.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;

use crate::besov::{besov_multiplier_norm, top_block, BesovIndex, BlockNorms};
use crate::linalg::SchattenIndex;
use crate::symbol::{cb_norm, lipschitz_norm, sup_norm, SmoothSymbol, Window};
use crate::torus::{Backend, TorusElement};
use crate::{Error, Result, C64};

/// Empirical constants standing in for the implicit constants of the contraction argument:
/// `c` bounds the nonlinear estimate, `c_p` the Lipschitz estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionConstants {
    pub c: f64,
    pub c_p: f64,
}

#[derive(Debug, Clone)]
pub struct ACProblem {
    pub u0: TorusElement,
    pub f: SmoothSymbol,
    /// `q` is forced to 2.
    pub idx: BesovIndex,
    pub t_max: f64,
    pub dt: f64,
    /// Radius of the admissible ball around the segment's initial Besov norm.
    pub delta: f64,
    /// Blow-up is declared once the Besov norm exceeds this multiple of `‖u₀‖_B`.
    pub blow_up_factor: f64,
    pub constants: Option<ContractionConstants>,
    pub max_iter: usize,
    /// Relative stopping tolerance on the sup-in-time `L_p` distance of successive iterates.
    pub tol: f64,
    /// Besov norms are recorded every this many grid points.
    pub checkpoint_every: usize,
    pub step_doubling: bool,
}

impl ACProblem {
    pub fn new(u0: TorusElement, f: SmoothSymbol, s: f64, p: f64, t_max: f64, dt: f64) -> Result<Self> {
        let defect = u0.hermitian_defect();
        if defect > 1e-11 * (1.0 + u0.max_coeff()) {
            return Err(Error::NonHermitianInput(defect));
        }
        let f0 = f.eval(0.0).norm();
        if !(f0 <= 1e-12) {
            return Err(Error::SymbolHypothesisError(f0));
        }
        if !(dt > 0.0) || !(t_max >= 0.0) {
            return Err(Error::DegenerateInput("dt must be positive and T_max non-negative"));
        }
        Ok(Self {
            u0,
            f,
            idx: BesovIndex::new(s, p, 2.0)?,
            t_max,
            dt,
            delta: 1.0,
            blow_up_factor: 1e3,
            constants: None,
            max_iter: 60,
            tol: 1e-13,
            checkpoint_every: 10,
            step_doubling: true,
        })
    }

    pub fn with_constants(mut self, c: ContractionConstants) -> Self {
        self.constants = Some(c);
        self
    }

    /// Smoothness order `n ≥ s` used for the localized `C_b^n` norm of `F`.
    pub fn smoothness_order(&self) -> usize {
        (self.idx.s.ceil() as usize).max(1).min(self.f.max_order())
    }

    fn besov(&self, u: &TorusElement) -> Result<f64> {
        besov_multiplier_norm(u, &self.idx)
    }
}

/// `T = (max(C, 2C_p)·‖F‖_{C_b^n([−R, R])})⁻¹` with `R = ‖u‖_∞ + δ`; infinite for `F ≡ 0`.
pub fn contraction_time(problem: &ACProblem, u: &TorusElement) -> Result<f64> {
    let k = problem
        .constants
        .ok_or_else(|| Error::MissingBaseline("contraction constants C, C_p (run the baseline capture)".into()))?;
    let r = u.lp_norm(SchattenIndex::INFINITY)? + problem.delta;
    let w = Window::symmetric(r);
    let norm = sup_norm(&problem.f, &w).max(cb_norm(&problem.f, problem.smoothness_order(), &w)?);
    let scale = k.c.max(2.0 * k.c_p) * norm;
    Ok(if scale > 0.0 { 1.0 / scale } else { f64::INFINITY })
}

/// Starting guess for the Picard iteration on a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialIterate {
    /// `u(t) ≡ u(t₀)`.
    Frozen,
    /// `u(t) = e^{(t−t₀)Δ}u(t₀)`.
    HeatFlow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    pub iterations: usize,
    /// Largest ratio of successive sup-in-time distances above the round-off floor.
    pub factor: f64,
    pub distances: Vec<f64>,
    pub ball_max: f64,
    pub ball_radius: f64,
    /// Richardson estimate `‖u_{h/2} − u_h‖_p / 3`; zero without step doubling.
    pub step_error: f64,
}

/// States on one segment's grid; `states[0]` is the segment's initial value.
#[derive(Debug, Clone)]
pub struct Segment {
    pub times: Vec<f64>,
    pub states: Vec<TorusElement>,
}

/// `e^{−z}`, `∫₀¹ e^{−zr}dr` and `∫₀¹ e^{−zr}r dr`.
fn kernel_weights(z: f64) -> (f64, f64, f64) {
    if z < 0.1 {
        let (mut phi1, mut psi, mut term) = (0.0, 0.0, 1.0);
        for n in 0..24 {
            phi1 += term / (n + 1) as f64;
            psi += term / (n + 2) as f64;
            term *= -z / (n + 1) as f64;
        }
        return ((-z).exp(), phi1, psi);
    }
    let e = (-z).exp();
    (e, -(-z).exp_m1() / z, (1.0 - e * (1.0 + z)) / (z * z))
}

fn sup_distance(a: &[TorusElement], b: &[TorusElement], p: SchattenIndex) -> Result<f64> {
    let mut d = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        d = d.max(x.sub(y)?.lp_norm(p)?);
    }
    Ok(d)
}

struct GridSolve {
    states: Vec<TorusElement>,
    iterations: usize,
    factor: f64,
    distances: Vec<f64>,
}

/// Fixed point of the discrete Duhamel map on `steps` steps of size `h`.
fn picard_grid(problem: &ACProblem, start: &TorusElement, steps: usize, h: f64, init: InitialIterate) -> Result<GridSolve> {
    let alg = start.algebra();
    let weights: Vec<(f64, f64, f64)> = (0..alg.num_modes())
        .map(|i| {
            let k = alg.mode(i);
            let (e, phi1, psi) = kernel_weights(h * (k[0] * k[0] + k[1] * k[1]) as f64);
            // ∫₀ʰ e^{−(h−s)λ}[(1 − s/h)F₀ + (s/h)F₁] ds
            (e, h * psi, h * (phi1 - psi))
        })
        .collect();
    let base: Vec<TorusElement> = (0..=steps).map(|i| start.heat(h * i as f64)).collect::<Result<_>>()?;
    let mut iterate = match init {
        InitialIterate::Frozen => alloc::vec![start.clone(); steps + 1],
        InitialIterate::HeatFlow => base.clone(),
    };
    let p = problem.idx.p;
    let scale = base.iter().map(|x| x.l2()).fold(start.l2(), f64::max).max(f64::MIN_POSITIVE);
    let mut distances = Vec::new();
    let mut factor = 0.0f64;
    for _ in 0..problem.max_iter {
        let fv: Vec<TorusElement> = iterate.iter().map(|u| u.apply_symbol(&problem.f)).collect::<Result<_>>()?;
        let mut acc = alloc::vec![C64::new(0.0, 0.0); weights.len()];
        let mut next = Vec::with_capacity(steps + 1);
        next.push(base[0].clone());
        for i in 0..steps {
            let (f0, f1) = (fv[i].coeffs(), fv[i + 1].coeffs());
            for (m, a) in acc.iter_mut().enumerate() {
                let (e, w0, w1) = weights[m];
                *a = *a * e + f0[m] * w0 + f1[m] * w1;
            }
            let mut u = base[i + 1].clone();
            for (c, a) in u.coeffs_mut().iter_mut().zip(&acc) {
                *c += a;
            }
            next.push(u);
        }
        let d = sup_distance(&next, &iterate, p)?;
        let size = next.iter().map(|x| x.l2()).fold(0.0, f64::max);
        if !d.is_finite() || !size.is_finite() || d > 1e8 * scale {
            return Err(Error::NoContraction(f64::INFINITY));
        }
        if let Some(&prev) = distances.last() {
            if prev > 1e-13 * scale {
                factor = factor.max(d / prev);
            }
        }
        distances.push(d);
        iterate = next;
        if d <= problem.tol * scale.max(size) {
            if factor >= 1.0 {
                return Err(Error::NoContraction(factor));
            }
            return Ok(GridSolve { states: iterate, iterations: distances.len(), factor, distances });
        }
    }
    Err(Error::NoContraction(factor.max(1.0)))
}

/// Picard iteration for the mild equation on `[t0, t0 + len]` starting from `start`.
///
/// With `step_doubling` the grid is solved at `h` and `h/2` and the two are combined by
/// Richardson extrapolation; the difference is reported as the step error.
pub fn picard_solve(
    problem: &ACProblem,
    start: &TorusElement,
    t0: f64,
    len: f64,
    init: InitialIterate,
) -> Result<(Segment, PicardReport)> {
    if !(len > 0.0) {
        return Err(Error::NegativeTime(len));
    }
    let steps = ((len / problem.dt) - 1e-9).ceil().max(1.0) as usize;
    let h = len / steps as f64;
    let coarse = picard_grid(problem, start, steps, h, init)?;
    let mut factor = coarse.factor;
    let mut step_error = 0.0f64;
    let states = if problem.step_doubling {
        let fine = picard_grid(problem, start, 2 * steps, h / 2.0, init)?;
        factor = factor.max(fine.factor);
        let mut out = Vec::with_capacity(steps + 1);
        for (i, c) in coarse.states.iter().enumerate() {
            let f = &fine.states[2 * i];
            let corr = f.sub(c)?.scale(C64::new(1.0 / 3.0, 0.0));
            step_error = step_error.max(corr.lp_norm(problem.idx.p)?);
            out.push(f.add(&corr)?);
        }
        out
    } else {
        coarse.states
    };
    for u in &states {
        let defect = u.hermitian_defect();
        if defect > 1e-11 * (1.0 + u.max_coeff()) {
            return Err(Error::NonHermitianInput(defect));
        }
    }
    let ball_radius = problem.besov(start)? + problem.delta;
    let mut ball_max = 0.0f64;
    let every = problem.checkpoint_every.max(1);
    for (i, u) in states.iter().enumerate() {
        if i % every == 0 || i == steps {
            ball_max = ball_max.max(problem.besov(u)?);
        }
    }
    if ball_max > ball_radius {
        return Err(Error::BallViolation { norm: ball_max, radius: ball_radius });
    }
    let times = (0..=steps).map(|i| t0 + h * i as f64).collect();
    let report = PicardReport {
        iterations: coarse.iterations,
        factor,
        distances: coarse.distances,
        ball_max,
        ball_radius,
        step_error,
    };
    Ok((Segment { times, states }, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowUpReason {
    /// Norm above threshold with an increasing log-norm slope over three checkpoints.
    Threshold,
    /// Contraction could not be restored by halving the segment.
    StepCollapse,
}

/// Heuristic blow-up flag; the exact criterion is `limsup ‖u(t)‖_B = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    pub time: f64,
    pub norm: f64,
    pub reason: BlowUpReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentInfo {
    pub t0: f64,
    pub len: f64,
    pub factor: f64,
    pub iterations: usize,
    pub halvings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub index: usize,
    pub time: f64,
    pub besov: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<TorusElement>,
    pub checkpoints: Vec<Checkpoint>,
    pub segments: Vec<SegmentInfo>,
    pub blow_up: Option<BlowUp>,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Index of the grid point at time `t`, if there is one.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (1.0 + t.abs());
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }
}

/// Segments shorter than this fraction of `dt` count as a collapsed step.
const MIN_SEGMENT_FRACTION: f64 = 1.0 / 1024.0;

/// Continues Picard segments from `u₀` until `T_max` or a detected blow-up.
pub fn evolve(problem: &ACProblem) -> Result<Trajectory> {
    let b0 = problem.besov(&problem.u0)?;
    let threshold = problem.blow_up_factor * b0.max(f64::MIN_POSITIVE);
    let mut traj = Trajectory {
        times: alloc::vec![0.0],
        states: alloc::vec![problem.u0.clone()],
        checkpoints: alloc::vec![Checkpoint { index: 0, time: 0.0, besov: b0 }],
        segments: Vec::new(),
        blow_up: None,
    };
    let eps = 1e-12 * (1.0 + problem.t_max);
    let every = problem.checkpoint_every.max(1);
    while traj.final_time() < problem.t_max - eps {
        let t = traj.final_time();
        let u = traj.states.last().unwrap().clone();
        let mut len = contraction_time(problem, &u)?.min(problem.t_max - t);
        if len >= problem.dt && t + len < problem.t_max - eps {
            // whole steps keep the grid aligned across runs
            len = (len / problem.dt).floor() * problem.dt;
        }
        let mut halvings = 0;
        let solved = loop {
            if len < problem.dt * MIN_SEGMENT_FRACTION {
                break None;
            }
            match picard_solve(problem, &u, t, len, InitialIterate::HeatFlow) {
                Ok(s) => break Some(s),
                Err(Error::NoContraction(_)) | Err(Error::BallViolation { .. }) => {
                    len *= 0.5;
                    halvings += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let Some((seg, report)) = solved else {
            let norm = traj.checkpoints.last().map_or(b0, |c| c.besov);
            traj.blow_up = Some(BlowUp { time: t, norm, reason: BlowUpReason::StepCollapse });
            break;
        };
        traj.segments.push(SegmentInfo { t0: t, len, factor: report.factor, iterations: report.iterations, halvings });
        let offset = traj.times.len() - 1;
        let last = seg.times.len() - 1;
        for (i, (tt, st)) in seg.times.into_iter().zip(seg.states).enumerate().skip(1) {
            traj.times.push(tt);
            traj.states.push(st);
            let index = offset + i;
            if index.is_multiple_of(every) || i == last {
                let besov = problem.besov(&traj.states[index])?;
                traj.checkpoints.push(Checkpoint { index, time: tt, besov });
            }
        }
        if let Some(b) = detect_blow_up(&traj.checkpoints, threshold) {
            traj.blow_up = Some(b);
            break;
        }
    }
    Ok(traj)
}

fn detect_blow_up(cps: &[Checkpoint], threshold: f64) -> Option<BlowUp> {
    let n = cps.len();
    if n < 3 || !(cps[n - 1].besov > threshold) {
        return None;
    }
    let slope = |a: &Checkpoint, b: &Checkpoint| (b.besov.ln() - a.besov.ln()) / (b.time - a.time);
    let (a, b, c) = (&cps[n - 3], &cps[n - 2], &cps[n - 1]);
    let rising = slope(b, c) > 0.0 && slope(b, c) >= slope(a, b);
    rising.then_some(BlowUp { time: c.time, norm: c.besov, reason: BlowUpReason::Threshold })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongResidual {
    pub time: f64,
    pub value: f64,
}

/// `‖∂_t u − Δu − F(u)‖_p` at interior grid points with `t ≥ t_min`, using the three-point
/// derivative on the (possibly non-uniform) grid.
pub fn strong_residual(traj: &Trajectory, problem: &ACProblem, t_min: f64) -> Result<Vec<StrongResidual>> {
    let mut out = Vec::new();
    let n = traj.states.len();
    for i in 1..n.saturating_sub(1) {
        let t = traj.times[i];
        if t < t_min {
            continue;
        }
        let (h1, h2) = (t - traj.times[i - 1], traj.times[i + 1] - t);
        let (a, b, c) = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
        let u = &traj.states[i];
        let fu = u.apply_symbol(&problem.f)?;
        let mut r = u.multiplier(|k| C64::new((k[0] * k[0] + k[1] * k[1]) as f64, 0.0));
        for (m, z) in r.coeffs_mut().iter_mut().enumerate() {
            let du = traj.states[i - 1].coeffs()[m] * a + u.coeffs()[m] * b + traj.states[i + 1].coeffs()[m] * c;
            *z += du - fu.coeffs()[m];
        }
        out.push(StrongResidual { time: t, value: r.lp_norm(problem.idx.p)? });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingRow {
    pub time: f64,
    /// `‖u(t)‖_{B^α_{p,2}}` per requested `α`.
    pub norms: Vec<f64>,
    /// `‖△_J u(t)‖_p / ‖△_J u₀‖_p` for the highest block `J` where `u₀` has mass.
    pub top_ratio: f64,
}

/// Besov norms along the trajectory at the given grid indices.
pub fn smoothing_report(traj: &Trajectory, alphas: &[f64], p: SchattenIndex, indices: &[usize]) -> Result<Vec<SmoothingRow>> {
    let q = SchattenIndex::TWO;
    let first = &traj.states[0];
    let n0 = BlockNorms::compute(first, &[p])?.norms;
    // highest block carrying mass at t = 0
    let j = (0..=top_block(first) as usize).rev().find(|&j| n0[j][0] > 0.0).unwrap_or(0);
    let top0 = n0[j][0];
    let mut rows = Vec::with_capacity(indices.len());
    for &i in indices {
        let bn = BlockNorms::compute(&traj.states[i], &[p])?;
        rows.push(SmoothingRow {
            time: traj.times[i],
            norms: alphas.iter().map(|&a| bn.besov(a, 0, q)).collect(),
            top_ratio: if top0 > 0.0 { bn.norms[j][0] / top0 } else { 0.0 },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalExistenceReport {
    pub reached_t_max: bool,
    pub blow_up: Option<BlowUp>,
    /// `Ĉ = C_p · Lip(F)`.
    pub c_hat: f64,
    /// `max_t ‖u(t)‖_B / (‖u₀‖_B e^{Ĉt})`.
    pub envelope_ratio: f64,
    pub pass: bool,
}

/// Grönwall envelope check for Lipschitz `F`; the Lipschitz norm is sampled on `lip_window`.
pub fn global_existence_check(problem: &ACProblem, lip_window: &Window) -> Result<GlobalExistenceReport> {
    let k = problem
        .constants
        .ok_or_else(|| Error::MissingBaseline("contraction constants C, C_p (run the baseline capture)".into()))?;
    let c_hat = k.c_p * lipschitz_norm(&problem.f, lip_window);
    let traj = evolve(problem)?;
    let b0 = traj.checkpoints[0].besov;
    let mut envelope_ratio = 0.0f64;
    for cp in &traj.checkpoints {
        let env = b0 * (c_hat * cp.time).exp();
        envelope_ratio = envelope_ratio.max(if env > 0.0 { cp.besov / env } else { cp.besov });
    }
    let reached = traj.final_time() >= problem.t_max - 1e-12 * (1.0 + problem.t_max);
    let pass = reached && traj.blow_up.is_none() && envelope_ratio <= 1.0 + 1e-10;
    Ok(GlobalExistenceReport { reached_t_max: reached, blow_up: traj.blow_up, c_hat, envelope_ratio, pass })
}

/// Sup over common grid times of `‖u_matrix(t) − u_grid(t)‖₂` at `θ = 0`.
pub fn commutative_cross_check(problem: &ACProblem) -> Result<f64> {
    if problem.u0.algebra().theta_num() != 0 {
        return Err(Error::BackendMismatch("the cross-check needs θ = 0"));
    }
    let mut pm = problem.clone();
    pm.u0 = problem.u0.with_backend(Backend::Matrix)?;
    let mut pc = problem.clone();
    pc.u0 = problem.u0.with_backend(Backend::Commutative)?;
    let (tm, tc) = (evolve(&pm)?, evolve(&pc)?);
    let mut worst = 0.0f64;
    let mut matched = 0;
    for (i, &t) in tm.times.iter().enumerate() {
        if let Some(j) = tc.index_at(t) {
            let a = &tm.states[i];
            let b = &tc.states[j];
            let d: f64 = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm_sqr()).sum();
            worst = worst.max(d.sqrt());
            matched += 1;
        }
    }
    if matched < 2 {
        return Err(Error::DegenerateInput("the two trajectories share no grid times"));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{random_band_element, TorusAlgebra};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const K: ContractionConstants = ContractionConstants { c: 1.5, c_p: 1.0 };

    fn start(n: usize, p: i64, band: i64, amp: f64, seed: u64) -> TorusElement {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = TorusAlgebra::matrix(n, p).unwrap();
        let u = random_band_element(&a, &mut r, band, 0.5, true);
        u.scale(C64::new(amp / u.l2(), 0.0))
    }

    fn problem(u0: TorusElement, f: &str, t_max: f64, dt: f64) -> ACProblem {
        ACProblem::new(u0, SmoothSymbol::parse(f).unwrap(), 0.5, 2.0, t_max, dt).unwrap().with_constants(K)
    }

    #[test]
    fn kernel_weights_are_continuous() {
        for z in [0.0999999, 0.1000001] {
            let (_, a, b) = kernel_weights(z);
            assert!((a - (1.0 - (-z).exp()) / z).abs() < 1e-12);
            assert!((b - (1.0 - (-z).exp() * (1.0 + z)) / (z * z)).abs() < 1e-9);
        }
        let (e, a, b) = kernel_weights(0.0);
        assert_eq!((e, a, b), (1.0, 1.0, 0.5));
    }

    #[test]
    fn construction_guards() {
        let u = start(8, 1, 2, 1.0, 1);
        assert!(matches!(
            ACProblem::new(u.clone(), SmoothSymbol::parse("cos(x)").unwrap(), 0.5, 2.0, 1.0, 1e-2),
            Err(Error::SymbolHypothesisError(_))
        ));
        let p = ACProblem::new(u.clone(), SmoothSymbol::parse("tanh(x)").unwrap(), 0.5, 2.0, 1.0, 1e-2).unwrap();
        assert!(matches!(contraction_time(&p, &u), Err(Error::MissingBaseline(_))));
        assert!(matches!(u.heat(-0.1), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn contraction_time_formula() {
        let u = start(8, 1, 2, 1.0, 2);
        let p1 = problem(u.clone(), "tanh(x)", 1.0, 1e-2);
        let mut p2 = p1.clone();
        p2.f = p1.f.scaled(C64::new(2.0, 0.0));
        let (t1, t2) = (contraction_time(&p1, &u).unwrap(), contraction_time(&p2, &u).unwrap());
        assert!(t1 > 0.0 && (t2 - t1 / 2.0).abs() < 1e-12 * t1);
        let mut p3 = problem(u.clone(), "x^3", 1.0, 1e-2);
        let mut last = f64::INFINITY;
        for delta in [0.1, 0.5, 1.0, 2.0] {
            p3.delta = delta;
            let t = contraction_time(&p3, &u).unwrap();
            assert!(t <= last);
            last = t;
        }
        assert_eq!(contraction_time(&problem(u.clone(), "0", 1.0, 1e-2), &u).unwrap(), f64::INFINITY);
    }

    #[test]
    fn heat_flow_and_zero_data() {
        let u = start(8, 1, 3, 1.0, 3);
        let p = problem(u.clone(), "0", 0.5, 1e-2);
        let (seg, rep) = picard_solve(&p, &u, 0.0, 0.5, InitialIterate::HeatFlow).unwrap();
        assert_eq!(rep.iterations, 1);
        for (t, s) in seg.times.iter().zip(&seg.states) {
            assert!(s.sub(&u.heat(*t).unwrap()).unwrap().l2() < 1e-14);
        }
        let traj = evolve(&p).unwrap();
        assert!((traj.final_time() - 0.5).abs() < 1e-12);
        let z = problem(u.algebra().zero(), "x^3 - x", 0.2, 1e-2);
        let tz = evolve(&z).unwrap();
        assert!(tz.states.iter().all(|s| s.max_coeff() == 0.0));
    }

    #[test]
    fn linear_symbol_matches_closed_form() {
        let u = start(8, 1, 3, 1.0, 4);
        let c = 0.5;
        let p = problem(u.clone(), "0.5*x", 0.5, 1e-3);
        let traj = evolve(&p).unwrap();
        let mut worst = 0.0f64;
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = u.multiplier(|k| C64::new(((c - (k[0] * k[0] + k[1] * k[1]) as f64) * t).exp(), 0.0));
            worst = worst.max(s.sub(&exact).unwrap().l2());
        }
        assert!(worst < 1e-8, "{worst:e}");
    }

    #[test]
    fn picard_contracts_and_is_unique() {
        let u = start(8, 1, 3, 1.0, 5);
        let p = problem(u.clone(), "tanh(x)", 1.0, 1e-2);
        let t = contraction_time(&p, &u).unwrap();
        let (a, ra) = picard_solve(&p, &u, 0.0, t, InitialIterate::Frozen).unwrap();
        let (b, rb) = picard_solve(&p, &u, 0.0, t, InitialIterate::HeatFlow).unwrap();
        assert!(ra.factor < 1.0 && rb.factor < 1.0);
        let scale = a.states.iter().map(|x| x.l2()).fold(0.0, f64::max);
        let d = sup_distance(&a.states, &b.states, SchattenIndex::TWO).unwrap();
        assert!(d <= 10.0 * p.tol * scale, "{d:e}");
        for s in &a.states {
            assert!(s.is_hermitian(1e-11));
        }
    }

    #[test]
    fn riccati_blow_up_on_the_grid() {
        let a = TorusAlgebra::commutative(2, 8).unwrap();
        let mut u = start(8, 0, 1, 0.1, 6).with_backend(Backend::Commutative).unwrap();
        u.set_coeff([0, 0], C64::new(2.0, 0.0));
        assert_eq!(u.algebra(), &a);
        let p = problem(u, "x^2", 2.0, 1e-2);
        let traj = evolve(&p).unwrap();
        let b = traj.blow_up.expect("the zero mode blows up near t = 1/2");
        assert!(b.time < 0.6 && b.time > 0.3, "{b:?}");
    }

    #[test]
    fn strong_residual_is_second_order() {
        let u = start(8, 1, 1, 0.5, 7);
        let mut maxes = Vec::new();
        for dt in [2e-3, 1e-3] {
            let p = problem(u.clone(), "tanh(x)", 0.2, dt);
            let traj = evolve(&p).unwrap();
            let r = strong_residual(&traj, &p, 0.05).unwrap();
            maxes.push(r.iter().map(|x| x.value).fold(0.0, f64::max));
        }
        assert!(maxes[0] / maxes[1] >= 3.0, "{maxes:?}");
        let heat = problem(u.clone(), "0", 0.1, 1e-3);
        let r = strong_residual(&evolve(&heat).unwrap(), &heat, 0.01).unwrap();
        assert!(r.iter().all(|x| x.value <= 1e-6));
    }

    #[test]
    fn smoothing_and_global_existence() {
        let u = start(16, 1, 7, 1.0, 8);
        let p = problem(u.clone(), "tanh(x)", 0.3, 1e-2);
        let traj = evolve(&p).unwrap();
        let idx: Vec<usize> = (0..traj.times.len()).step_by(10).collect();
        let rows = smoothing_report(&traj, &[0.5, 1.0, 1.5], SchattenIndex::TWO, &idx).unwrap();
        assert!((rows[0].top_ratio - 1.0).abs() < 1e-12);
        for w in rows.windows(2) {
            assert!(w[1].top_ratio <= w[0].top_ratio, "{:?}", rows.iter().map(|r| r.top_ratio).collect::<Vec<_>>());
        }
        assert!(rows.last().unwrap().top_ratio < 1.0);
        let g = global_existence_check(&p, &Window::symmetric(8.0)).unwrap();
        assert!(g.pass, "{g:?}");
    }

    #[test]
    fn matrix_and_grid_solvers_agree() {
        let u = start(8, 0, 2, 1.0, 9);
        let p = problem(u, "x^3 - x", 0.2, 1e-2);
        assert!(commutative_cross_check(&p).unwrap() <= 1e-8);
    }
}
