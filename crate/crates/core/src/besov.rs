//! Quantum Besov norms on the torus testbed and the inequality harnesses built on them.
//!
//! Three norms are provided:
//!
//! * the Littlewood–Paley form `(Σ_j 2^{jsq}‖△_j x‖_p^q)^{1/q}`,
//! * the difference form `‖x‖_p + Σ_i (Σ_j (2^{j(s−N)} ω_p^m(2^{−j}, ∂_i^N x))^q)^{1/q}`,
//! * the integral form `‖x‖_p + Σ_i (∫ (|ϱ|^{N−s}‖Δ_ϱ^m ∂_i^N x‖_p)^q dϱ/|ϱ|^d)^{1/q}`.
//!
//! Difference samples `h` are snapped to the lattice `(2π/M)ℤ^d` of an oversampled model,
//! where translations are exact automorphisms. Amplitudes are therefore lower bounds of the
//! true suprema over `|h| ≤ t`.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{func_calc_complex, HermitianOperator, Matrix, SchattenIndex, TraceMode};
use crate::quadrature::GaussLegendre;
use crate::symbol::{build_littlewood_paley_inhomogeneous, LPFilterFamily, SmoothSymbol};
use crate::torus::{mode_radius, Backend, MulMode, TorusElement};
use crate::{Error, Result, C64};

/// Smoothness `s` with integrability `p` and summability `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovIndex {
    pub s: f64,
    pub p: SchattenIndex,
    pub q: SchattenIndex,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        Ok(Self { s, p: SchattenIndex::new(p)?, q: SchattenIndex::new(q)? })
    }
}

/// Difference order `m` and derivative order `N` of the difference characterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DifferenceOrder {
    pub m: u32,
    pub n_der: u32,
}

impl DifferenceOrder {
    /// `N = ⌈s⌉ − 1` and the smallest `m` with `m + N > s`.
    pub fn default_for(s: f64) -> Self {
        let n_der = (s.ceil() as i64 - 1).max(0) as u32;
        let m = (s.floor() as i64 - n_der as i64 + 1).max(1) as u32;
        Self { m, n_der }
    }

    /// Checks `s > 0`, `0 ≤ N < s < m + N`.
    pub fn validate(&self, s: f64) -> Result<()> {
        if !(s > 0.0) {
            return Err(Error::HypothesisViolation(alloc::format!("difference forms need s > 0, got {s}")));
        }
        if (self.m + self.n_der) as f64 <= s {
            return Err(Error::HypothesisViolation(alloc::format!(
                "m + N = {} must exceed s = {s}",
                self.m + self.n_der
            )));
        }
        if self.n_der as f64 >= s {
            return Err(Error::HypothesisViolation(alloc::format!("N = {} must be below s = {s}", self.n_der)));
        }
        Ok(())
    }
}

/// Polar sampling of difference steps and the dyadic range `[−j1, j2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeSampling {
    /// Directions on the half circle (`d = 2`); ignored for `d = 1`.
    pub n_dir: usize,
    /// Radii per octave, log-spaced and containing every `2^{−j}`.
    pub per_octave: usize,
    /// Minimum lattice resolution `M`; elements are oversampled up to it.
    pub resolution: usize,
    pub j1: i32,
    pub j2: i32,
    /// Upper radius of the integral form.
    pub rho_max: f64,
}

impl Default for AmplitudeSampling {
    fn default() -> Self {
        Self { n_dir: 16, per_octave: 4, resolution: 128, j1: 3, j2: 8, rho_max: 2.0 * PI }
    }
}

impl AmplitudeSampling {
    pub fn coarse() -> Self {
        Self { n_dir: 6, per_octave: 2, resolution: 64, ..Self::default() }
    }
}

/// Moves `x` to the oversampled model required by `sampling`.
pub fn prepare(x: &TorusElement, sampling: &AmplitudeSampling) -> Result<TorusElement> {
    let a = x.algebra();
    if a.resolution() >= sampling.resolution {
        return Ok(x.clone());
    }
    let l = sampling.resolution.div_ceil(a.n());
    x.with_oversampling(l)
}

fn lq_sum(terms: impl Iterator<Item = f64>, q: SchattenIndex) -> f64 {
    if q.is_infinite() {
        return terms.fold(0.0, f64::max);
    }
    let qv = q.value();
    terms.map(|t| t.powf(qv)).sum::<f64>().powf(1.0 / qv)
}

/// Highest non-homogeneous block that can meet the mode lattice.
pub fn top_block(x: &TorusElement) -> i32 {
    let a = x.algebra();
    let rmax = (a.n() as f64 / 2.0) * (a.d() as f64).sqrt();
    (rmax.log2() + 1.0).ceil() as i32
}

/// `‖△_j x‖_p` for all blocks and several exponents.
#[derive(Debug, Clone)]
pub struct BlockNorms {
    pub ps: Vec<SchattenIndex>,
    /// `norms[j][i]` is `‖△_j x‖_{p_i}`.
    pub norms: Vec<Vec<f64>>,
}

impl BlockNorms {
    pub fn compute(x: &TorusElement, ps: &[SchattenIndex]) -> Result<Self> {
        let lp = build_littlewood_paley_inhomogeneous(x.algebra().d());
        let mut norms = Vec::new();
        for j in 0..=top_block(x) {
            let b = x.lp_block(j, &lp);
            if b.max_coeff() == 0.0 {
                norms.push(alloc::vec![0.0; ps.len()]);
            } else {
                norms.push(b.lp_norms(ps)?);
            }
        }
        Ok(Self { ps: ps.to_vec(), norms })
    }

    pub fn besov(&self, s: f64, p_idx: usize, q: SchattenIndex) -> f64 {
        lq_sum(self.norms.iter().enumerate().map(|(j, n)| 2f64.powf(j as f64 * s) * n[p_idx]), q)
    }
}

/// `(Σ_j 2^{jsq}‖△_j x‖_p^q)^{1/q}` over the finitely many nonzero blocks.
pub fn besov_multiplier_norm(x: &TorusElement, idx: &BesovIndex) -> Result<f64> {
    Ok(BlockNorms::compute(x, &[idx.p])?.besov(idx.s, 0, idx.q))
}

#[derive(Debug, Clone)]
struct Sample {
    r: f64,
    norms: Vec<f64>,
}

/// Norms `‖Δ_h^m y‖_p` on the sampled lattice steps, grouped by direction.
#[derive(Debug, Clone)]
struct AxisTable {
    samples: Vec<Sample>,
    by_dir: Vec<Vec<usize>>,
}

fn sample_steps(d: usize, sampling: &AmplitudeSampling, res: usize) -> (Vec<[i64; 2]>, Vec<Vec<usize>>) {
    let n_dir = if d == 1 { 1 } else { sampling.n_dir.max(1) };
    let po = sampling.per_octave.max(1) as i32;
    let mut index: BTreeMap<[i64; 2], usize> = BTreeMap::new();
    let mut steps = Vec::new();
    let mut by_dir = alloc::vec![Vec::new(); n_dir];
    let unit = 2.0 * PI / res as f64;
    for (l, dir) in by_dir.iter_mut().enumerate() {
        let ang = PI * l as f64 / n_dir as f64;
        for i in (-sampling.j1 * po)..=(sampling.j2 * po) {
            let r = 2f64.powf(-(i as f64) / po as f64);
            let h = if d == 1 { [r, 0.0] } else { [r * ang.cos(), r * ang.sin()] };
            let m = [(h[0] / unit).round() as i64, (h[1] / unit).round() as i64];
            if m == [0, 0] {
                continue;
            }
            let k = *index.entry(m).or_insert_with(|| {
                steps.push(m);
                steps.len() - 1
            });
            if !dir.contains(&k) {
                dir.push(k);
            }
        }
    }
    (steps, by_dir)
}

fn axis_table(y: &TorusElement, m: u32, sampling: &AmplitudeSampling, ps: &[SchattenIndex]) -> Result<AxisTable> {
    let a = y.algebra();
    let res = a.resolution();
    let unit = 2.0 * PI / res as f64;
    let (steps, mut by_dir) = sample_steps(a.d(), sampling, res);
    let zero = y.max_coeff() == 0.0;
    let mut samples = Vec::with_capacity(steps.len());
    for st in &steps {
        let h = [st[0] as f64 * unit, st[1] as f64 * unit];
        let r = (h[0] * h[0] + h[1] * h[1]).sqrt();
        let norms = if zero {
            alloc::vec![0.0; ps.len()]
        } else {
            let dy = y.difference(&h, m);
            if dy.max_coeff() == 0.0 {
                alloc::vec![0.0; ps.len()]
            } else {
                dy.lp_norms(ps)?
            }
        };
        samples.push(Sample { r, norms });
    }
    for dir in &mut by_dir {
        dir.sort_by(|&i, &j| samples[i].r.partial_cmp(&samples[j].r).unwrap_or(core::cmp::Ordering::Equal));
    }
    Ok(AxisTable { samples, by_dir })
}

impl AxisTable {
    /// Sampled `ω(t)` and whether any step with `|h| ≤ t` exists.
    fn amplitude(&self, t: f64, p_idx: usize) -> (f64, bool) {
        let mut best = 0.0f64;
        let mut any = false;
        for s in &self.samples {
            if s.r <= t * (1.0 + 1e-12) {
                any = true;
                best = best.max(s.norms[p_idx]);
            }
        }
        (best, any)
    }
}

/// Sampled `ω_p^m(t, x)`; a lower bound of the supremum over `|h| ≤ t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeReport {
    pub value: f64,
    pub samples: usize,
    /// Largest sampled `|h|` not exceeding `t`.
    pub radius: f64,
}

pub fn amplitude(x: &TorusElement, t: f64, m: u32, p: SchattenIndex, sampling: &AmplitudeSampling) -> Result<AmplitudeReport> {
    let y = prepare(x, sampling)?;
    let table = axis_table(&y, m, sampling, &[p])?;
    let (value, _) = table.amplitude(t, 0);
    let within = table.samples.iter().filter(|s| s.r <= t * (1.0 + 1e-12));
    let (samples, radius) = within.fold((0, 0.0f64), |(n, r), s| (n + 1, r.max(s.r)));
    Ok(AmplitudeReport { value, samples, radius })
}

/// Shared tables for the difference and integral forms of one element.
#[derive(Debug, Clone)]
pub struct DifferenceData {
    order: DifferenceOrder,
    sampling: AmplitudeSampling,
    d: usize,
    pub ps: Vec<SchattenIndex>,
    /// `‖x‖_p` per exponent.
    pub base: Vec<f64>,
    axes: Vec<AxisTable>,
}

/// Difference-form value with its truncation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceNormReport {
    pub value: f64,
    pub base_norm: f64,
    pub j_min: i32,
    /// Last dyadic index with lattice samples; later terms use the `t^m` tail.
    pub j_resolved: i32,
    pub j_max: i32,
    /// Terms with `t ≥ 2π`, excluded because translations are periodic.
    pub saturated_terms: usize,
    pub tail: f64,
}

impl DifferenceData {
    pub fn compute(x: &TorusElement, order: DifferenceOrder, sampling: &AmplitudeSampling, ps: &[SchattenIndex]) -> Result<Self> {
        let y = prepare(x, sampling)?;
        let d = y.algebra().d();
        let base = y.lp_norms(ps)?;
        let mut axes = Vec::new();
        if order.n_der == 0 {
            axes.push(axis_table(&y, order.m, sampling, ps)?);
        } else {
            for i in 0..d {
                let mut alpha = [0usize; 2];
                alpha[i] = order.n_der as usize;
                let yi = y.derive_multi(&alpha[..d]);
                axes.push(axis_table(&yi, order.m, sampling, ps)?);
            }
        }
        Ok(Self { order, sampling: *sampling, d, ps: ps.to_vec(), base, axes })
    }

    pub fn order(&self) -> DifferenceOrder {
        self.order
    }

    pub fn difference_norm(&self, s: f64, p_idx: usize, q: SchattenIndex) -> Result<DifferenceNormReport> {
        self.order.validate(s)?;
        let n = self.order.n_der as f64;
        let m = self.order.m as f64;
        let mut total = self.base[p_idx];
        let mut saturated = 0;
        let mut j_resolved = -self.sampling.j1;
        let mut tail_total = 0.0;
        for axis in &self.axes {
            let mut terms = Vec::new();
            saturated = 0;
            let mut last = None;
            for j in -self.sampling.j1..=self.sampling.j2 {
                let t = 2f64.powi(-j);
                if t >= 2.0 * PI {
                    saturated += 1;
                    continue;
                }
                let (w, any) = axis.amplitude(t, p_idx);
                if !any {
                    break;
                }
                let a = 2f64.powf(j as f64 * (s - n)) * w;
                terms.push(a);
                last = Some((j, a));
            }
            let (jl, al) = last.unwrap_or((-self.sampling.j1, 0.0));
            j_resolved = jl;
            // ω(2^{-j}) ≈ ω(2^{-jl})·2^{-m(j-jl)} for the unresolved and truncated scales
            let r = 2f64.powf(s - n - m);
            let value = if q.is_infinite() {
                lq_sum(terms.iter().cloned(), q)
            } else {
                let qv = q.value();
                let tail = al.powf(qv) * r.powf(qv) / (1.0 - r.powf(qv));
                tail_total += tail;
                (terms.iter().map(|a| a.powf(qv)).sum::<f64>() + tail).powf(1.0 / qv)
            };
            total += value;
        }
        Ok(DifferenceNormReport {
            value: total,
            base_norm: self.base[p_idx],
            j_min: -self.sampling.j1,
            j_resolved,
            j_max: self.sampling.j2,
            saturated_terms: saturated,
            tail: tail_total,
        })
    }

    /// Log-radial trapezoid per direction with the `r^m` small-radius tail.
    pub fn integral_norm(&self, s: f64, p_idx: usize, q: SchattenIndex) -> Result<f64> {
        self.order.validate(s)?;
        let n = self.order.n_der as f64;
        let m = self.order.m as f64;
        let rho_max = self.sampling.rho_max;
        let w_dir = if self.d == 1 { 2.0 } else { 2.0 * PI / self.axes[0].by_dir.len() as f64 };
        let mut total = self.base[p_idx];
        for axis in &self.axes {
            if q.is_infinite() {
                let sup = axis
                    .samples
                    .iter()
                    .filter(|s| s.r <= rho_max)
                    .map(|smp| smp.r.powf(n - s) * smp.norms[p_idx])
                    .fold(0.0, f64::max);
                total += sup;
                continue;
            }
            let qv = q.value();
            let mut integral = 0.0;
            for dir in &axis.by_dir {
                let pts: Vec<(f64, f64)> = dir
                    .iter()
                    .map(|&i| &axis.samples[i])
                    .filter(|smp| smp.r <= rho_max)
                    .map(|smp| (smp.r.ln(), (smp.r.powf(n - s) * smp.norms[p_idx]).powf(qv)))
                    .collect();
                let Some(&(l0, g0)) = pts.first() else { continue };
                let mut acc = g0 / (qv * (m + n - s));
                for w in pts.windows(2) {
                    acc += 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1);
                }
                let &(ll, gl) = pts.last().unwrap_or(&(l0, g0));
                acc += gl * (rho_max.ln() - ll).max(0.0);
                integral += w_dir * acc;
            }
            total += integral.powf(1.0 / qv);
        }
        Ok(total)
    }
}

pub fn besov_difference_norm(
    x: &TorusElement,
    idx: &BesovIndex,
    order: DifferenceOrder,
    sampling: &AmplitudeSampling,
) -> Result<DifferenceNormReport> {
    order.validate(idx.s)?;
    DifferenceData::compute(x, order, sampling, &[idx.p])?.difference_norm(idx.s, 0, idx.q)
}

pub fn besov_integral_norm(x: &TorusElement, idx: &BesovIndex, order: DifferenceOrder, sampling: &AmplitudeSampling) -> Result<f64> {
    order.validate(idx.s)?;
    DifferenceData::compute(x, order, sampling, &[idx.p])?.integral_norm(idx.s, 0, idx.q)
}

/// Outcome of one doubling comparison `‖Δ_h^m x‖_p ≤ 2^m‖Δ_{h/2}^m x‖_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// Whether `h/2` lies on the lattice where translations are exact automorphisms.
    pub lattice_step: bool,
}

pub const DOUBLING_SLACK: f64 = 1.0 + 1e-10;

pub fn doubling_check(x: &TorusElement, h: &[f64], m: u32, p: SchattenIndex) -> Result<DoublingReport> {
    let half: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
    let lhs = x.difference(h, m).lp_norm(p)?;
    let rhs = 2f64.powi(m as i32) * x.difference(&half, m).lp_norm(p)?;
    let unit = 2.0 * PI / x.algebra().resolution() as f64;
    let lattice_step = half.iter().all(|v| {
        let k = v / unit;
        (k - k.round()).abs() < 1e-9
    });
    Ok(DoublingReport { lhs, rhs, pass: lhs <= rhs * DOUBLING_SLACK, lattice_step })
}

/// `‖Δ_h^m △_k x‖_p / (min(1, |h|^m 2^{km})‖△_k x‖_p)`, or `None` when `△_k x = 0`.
pub fn block_difference_check(x: &TorusElement, h: &[f64], m: u32, k: i32, p: SchattenIndex) -> Result<Option<f64>> {
    let lp = build_littlewood_paley_inhomogeneous(x.algebra().d());
    let b = x.lp_block(k, &lp);
    if b.max_coeff() == 0.0 {
        return Ok(None);
    }
    let bn = b.lp_norm(p)?;
    if bn == 0.0 {
        return Ok(None);
    }
    let hn = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let shape = (hn.powi(m as i32) * 2f64.powi(k * m as i32)).min(1.0);
    if shape == 0.0 {
        return Ok(None);
    }
    Ok(Some(b.difference(h, m).lp_norm(p)? / (shape * bn)))
}

/// `sup_t ‖e^{tΔ}x‖_{B^r} / ((1 + t^{(s−r)/2})‖x‖_{B^s})` over a time grid.
pub fn heat_smoothing_check(x: &TorusElement, s: f64, r: f64, p: SchattenIndex, q: SchattenIndex, times: &[f64]) -> Result<f64> {
    let denom_norm = besov_multiplier_norm(x, &BesovIndex { s, p, q })?;
    if denom_norm == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for &t in times {
        let num = besov_multiplier_norm(&x.heat(t)?, &BesovIndex { s: r, p, q })?;
        let w = if t == 0.0 {
            if s >= r {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            t.powf((s - r) / 2.0)
        };
        worst = worst.max(num / ((1.0 + w) * denom_norm));
    }
    Ok(worst)
}

fn hermitian_image(u: &TorusElement) -> Result<HermitianOperator> {
    HermitianOperator::new(u.to_matrix()?, TraceMode::Normalized)
}

fn exp_i(h: &HermitianOperator, c: f64) -> Result<Matrix> {
    Ok(func_calc_complex(&h.eig(), |x| C64::new(0.0, c * x).exp()))
}

/// `‖(e^{iξu} − 1) − RHS_K‖_2` for the telescoped Duhamel decomposition
///
/// `e^{iξu} − 1 = (e^{iξS_0u} − 1) + Σ_{j≥1} ∫₀¹ e^{iθξS_ju}(iξ△_ju)e^{i(1−θ)ξS_{j−1}u} dθ`
///
/// with `K` Gauss–Legendre nodes in `θ`.
pub fn meyer_residual(u: &TorusElement, xi: f64, k: usize) -> Result<f64> {
    let alg = *u.algebra();
    if alg.backend() != Backend::Matrix || alg.oversample() != 1 {
        return Err(Error::BackendMismatch("the decomposition runs on the base matrix model"));
    }
    let lp = build_littlewood_paley_inhomogeneous(alg.d());
    let dim = alg.matrix_dim();
    let id = Matrix::identity(dim);
    let lhs = &exp_i(&hermitian_image(u)?, xi)? - &id;
    let quad = GaussLegendre::new(k);
    let mut partial = u.lp_block(0, &lp);
    let mut prev = hermitian_image(&partial)?.eig();
    let mut rhs = &prev.apply(|x| C64::new(0.0, xi * x).exp()) - &id;
    for j in 1..=top_block(u) {
        let block = u.lp_block(j, &lp);
        if block.max_coeff() == 0.0 {
            continue;
        }
        partial = partial.add(&block)?;
        let cur = hermitian_image(&partial)?.eig();
        let mid = block.to_matrix()?.scale(C64::new(0.0, xi));
        for (&th, &w) in quad.nodes.iter().zip(&quad.weights) {
            let left = cur.apply(|x| C64::new(0.0, th * xi * x).exp());
            let right = prev.apply(|x| C64::new(0.0, (1.0 - th) * xi * x).exp());
            let term = left.matmul(&mid).matmul(&right).scale_real(w);
            rhs += &term;
        }
        prev = cur;
    }
    Ok((&lhs - &rhs).frobenius_norm() / (dim as f64).sqrt())
}

/// Symbol sequences `a_j, b_j` of `T_{a,b}u = Σ_j a_j △_j u b_j` with derivative certificates
/// `‖∂^α a_j‖_∞ ≤ M_{|α|}(a)·2^{j|α|}`.
#[derive(Debug, Clone)]
pub struct PsdoSymbolSequence {
    pub a: Vec<TorusElement>,
    pub b: Vec<TorusElement>,
    pub m_a: Vec<f64>,
    pub m_b: Vec<f64>,
}

fn multi_indices(d: usize, k: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    if d == 1 {
        out.push([k, 0]);
    } else {
        for a in 0..=k {
            out.push([a, k - a]);
        }
    }
    out
}

fn measured_growth(seq: &[TorusElement], k: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for (j, a) in seq.iter().enumerate() {
        let d = a.algebra().d();
        for alpha in multi_indices(d, k) {
            let v = a.derive_multi(&alpha[..d]).lp_norm(SchattenIndex::INFINITY)?;
            worst = worst.max(v / 2f64.powi((j * k) as i32));
        }
    }
    Ok(worst)
}

impl PsdoSymbolSequence {
    /// Certificates measured on the sequences up to order `kmax`, widened by `margin`.
    pub fn with_measured_certificates(a: Vec<TorusElement>, b: Vec<TorusElement>, kmax: usize, margin: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
        }
        let mut m_a = Vec::new();
        let mut m_b = Vec::new();
        for k in 0..=kmax {
            m_a.push(measured_growth(&a, k)? * margin);
            m_b.push(measured_growth(&b, k)? * margin);
        }
        Ok(Self { a, b, m_a, m_b })
    }

    /// `a_j = e^{iθξS_ju}`, `b_j = e^{i(1−θ)ξS_{j−1}u}` (with `S_{−1} = 0`).
    pub fn meyer_family(u: &TorusElement, xi: f64, theta: f64, kmax: usize) -> Result<Self> {
        let alg = *u.algebra();
        let lp = build_littlewood_paley_inhomogeneous(alg.d());
        let top = top_block(u);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut prev = alg.zero();
        for j in 0..=top {
            let cur = prev.add(&u.lp_block(j, &lp))?;
            a.push(exp_element(&cur, theta * xi)?);
            b.push(exp_element(&prev, (1.0 - theta) * xi)?);
            prev = cur;
        }
        Self::with_measured_certificates(a, b, kmax, 1.01)
    }

    /// Direct check of every certificate up to order `kmax`.
    pub fn check(&self, kmax: usize) -> Result<()> {
        for (seq, cert) in [(&self.a, &self.m_a), (&self.b, &self.m_b)] {
            for (k, &ck) in cert.iter().enumerate().take(kmax + 1) {
                for (j, x) in seq.iter().enumerate() {
                    let d = x.algebra().d();
                    for alpha in multi_indices(d, k) {
                        let observed = x.derive_multi(&alpha[..d]).lp_norm(SchattenIndex::INFINITY)?;
                        let certified = ck * 2f64.powi((j * k) as i32);
                        if observed > certified * (1.0 + 1e-9) + 1e-14 {
                            return Err(Error::CertificateViolation { block: j, observed, certified });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `max_{k ≤ n} M_k(a) · max_{k ≤ n} M_k(b)`.
    pub fn bound(&self, n: usize) -> f64 {
        let ma = self.m_a.iter().take(n + 1).cloned().fold(0.0, f64::max);
        let mb = self.m_b.iter().take(n + 1).cloned().fold(0.0, f64::max);
        ma * mb
    }
}

/// `e^{icx}` for Hermitian `x` on the base matrix model.
fn exp_element(x: &TorusElement, c: f64) -> Result<TorusElement> {
    let h = hermitian_image(x)?;
    TorusElement::from_matrix(x.algebra(), &exp_i(&h, c)?)
}

/// `T_{a,b}u` and `‖T_{a,b}u‖_B / (M(a)M(b)‖u‖_B)` with `M` taken at order `⌈s⌉`.
pub fn apply_paraproduct(seq: &PsdoSymbolSequence, u: &TorusElement, idx: &BesovIndex) -> Result<(TorusElement, f64)> {
    let n = idx.s.ceil().max(0.0) as usize;
    seq.check(n)?;
    let alg = *u.algebra();
    let lp = build_littlewood_paley_inhomogeneous(alg.d());
    let mut out = alg.zero();
    for (j, (a, b)) in seq.a.iter().zip(&seq.b).enumerate() {
        let blk = u.lp_block(j as i32, &lp);
        if blk.max_coeff() == 0.0 {
            continue;
        }
        out = out.add(&a.multiply(&blk, MulMode::Wrap)?.multiply(b, MulMode::Wrap)?)?;
    }
    let un = besov_multiplier_norm(u, idx)?;
    if un == 0.0 {
        return Ok((out, 0.0));
    }
    let ratio = besov_multiplier_norm(&out, idx)? / (seq.bound(n) * un);
    Ok((out, ratio))
}

fn check_symbol(f: &SmoothSymbol, s: f64) -> Result<()> {
    let f0 = f.eval(0.0).norm();
    if f0 > 1e-12 {
        return Err(Error::SymbolHypothesisError(f0));
    }
    let need = s.ceil().max(0.0) as usize;
    if f.max_order() < need {
        return Err(Error::OrderExceeded { requested: need, max: f.max_order() });
    }
    Ok(())
}

/// `‖F(u)‖_B / ‖u‖_B` with `F(u)` from the matrix functional calculus.
pub fn boundedness_ratio(f: &SmoothSymbol, u: &TorusElement, idx: &BesovIndex) -> Result<f64> {
    check_symbol(f, idx.s)?;
    let un = besov_multiplier_norm(u, idx)?;
    if un == 0.0 {
        return Err(Error::DegenerateInput("u has zero Besov norm"));
    }
    Ok(besov_multiplier_norm(&u.apply_symbol(f)?, idx)? / un)
}

/// `‖F(u) − F(v)‖_B / ‖u − v‖_B`.
pub fn lipschitz_besov_ratio(f: &SmoothSymbol, u: &TorusElement, v: &TorusElement, idx: &BesovIndex) -> Result<f64> {
    let dn = besov_multiplier_norm(&u.sub(v)?, idx)?;
    if dn == 0.0 {
        return Err(Error::DegenerateInput("u and v coincide"));
    }
    let fu = u.apply_symbol(f)?;
    let fv = v.apply_symbol(f)?;
    Ok(besov_multiplier_norm(&fu.sub(&fv)?, idx)? / dn)
}

/// `‖∂^α x‖_{B^{s−|α|}} / ‖x‖_{B^s}`.
pub fn reduction_ratio(x: &TorusElement, alpha: &[usize], idx: &BesovIndex) -> Result<f64> {
    let xn = besov_multiplier_norm(x, idx)?;
    if xn == 0.0 {
        return Ok(0.0);
    }
    let order: usize = alpha.iter().sum();
    let lowered = BesovIndex { s: idx.s - order as f64, ..*idx };
    Ok(besov_multiplier_norm(&x.derive_multi(alpha), &lowered)? / xn)
}

/// Filter weight `φ_j(|k|)` of a single mode, for closed-form checks.
pub fn mode_block_weight(lp: &LPFilterFamily, j: i32, k: [i64; 2]) -> f64 {
    lp.filter_radial(j, mode_radius(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{random_band_element, TorusAlgebra};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(v: f64) -> SchattenIndex {
        SchattenIndex::new(v).unwrap()
    }

    fn alg16() -> TorusAlgebra {
        TorusAlgebra::matrix(16, 1).unwrap()
    }

    #[test]
    fn order_hypotheses() {
        assert_eq!(DifferenceOrder::default_for(0.5), DifferenceOrder { m: 1, n_der: 0 });
        assert_eq!(DifferenceOrder::default_for(1.5), DifferenceOrder { m: 1, n_der: 1 });
        assert_eq!(DifferenceOrder::default_for(2.5), DifferenceOrder { m: 1, n_der: 2 });
        assert_eq!(DifferenceOrder::default_for(1.0), DifferenceOrder { m: 2, n_der: 0 });
        for s in [0.3, 0.5, 1.0, 1.5, 2.0, 2.5, 3.7] {
            DifferenceOrder::default_for(s).validate(s).unwrap();
        }
        assert!(DifferenceOrder { m: 1, n_der: 0 }.validate(1.0).is_err());
        assert!(DifferenceOrder { m: 3, n_der: 1 }.validate(1.0).is_err());
        assert!(DifferenceOrder { m: 1, n_der: 0 }.validate(-0.5).is_err());
        let x = alg16().one();
        let idx = BesovIndex::new(1.5, 2.0, 2.0).unwrap();
        assert!(matches!(
            besov_difference_norm(&x, &idx, DifferenceOrder { m: 1, n_der: 0 }, &AmplitudeSampling::coarse()),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn multiplier_norm_basics() {
        let a = alg16();
        let idx = BesovIndex::new(1.5, 2.0, 2.0).unwrap();
        assert_eq!(besov_multiplier_norm(&a.zero(), &idx).unwrap(), 0.0);
        let lp = build_littlewood_paley_inhomogeneous(2);
        // single mode: ‖△_j U^k‖_p = φ_j(|k|)
        let k = [4, 0];
        let u = a.basis(k);
        for (pv, qv) in [(1.0, 1.0), (2.0, 2.0), (f64::INFINITY, 1.5), (2.0, f64::INFINITY)] {
            let idx = BesovIndex::new(0.7, pv, qv).unwrap();
            let expect = lq_sum((0..8).map(|j| 2f64.powf(0.7 * j as f64) * mode_block_weight(&lp, j, k)), idx.q);
            let got = besov_multiplier_norm(&u, &idx).unwrap();
            assert!((got - expect).abs() < 1e-12 * expect, "{pv} {qv}");
        }
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let x = random_band_element(&a, &mut r, 5, 0.0, true);
        let c = C64::new(-0.3, 1.2);
        let n1 = besov_multiplier_norm(&x.scale(c), &idx).unwrap();
        assert!((n1 - c.norm() * besov_multiplier_norm(&x, &idx).unwrap()).abs() < 1e-12 * n1);
        // ℓ_q monotonicity
        for pv in [1.0, 2.0, f64::INFINITY] {
            let qs = [1.0, 1.5, 2.0, 4.0, f64::INFINITY];
            let bn = BlockNorms::compute(&x, &[p(pv)]).unwrap();
            for w in qs.windows(2) {
                assert!(bn.besov(1.5, 0, p(w[1])) <= bn.besov(1.5, 0, p(w[0])) * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn difference_and_integral_trivial_cases() {
        let a = alg16();
        let smp = AmplitudeSampling::coarse();
        for s in [0.5, 1.5, 2.5] {
            let order = DifferenceOrder::default_for(s);
            for pv in [1.0, 2.0, f64::INFINITY] {
                let idx = BesovIndex::new(s, pv, 2.0).unwrap();
                assert_eq!(besov_difference_norm(&a.zero(), &idx, order, &smp).unwrap().value, 0.0);
                assert_eq!(besov_integral_norm(&a.zero(), &idx, order, &smp).unwrap(), 0.0);
                let c = a.one().scale(C64::new(2.5, 0.0));
                let r = besov_difference_norm(&c, &idx, order, &smp).unwrap();
                assert!((r.value - 2.5).abs() < 1e-12);
                assert_eq!(r.saturated_terms, 1);
                assert!((besov_integral_norm(&c, &idx, order, &smp).unwrap() - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn amplitude_single_mode_closed_form() {
        let c = TorusAlgebra::commutative(1, 16).unwrap();
        let smp = AmplitudeSampling { per_octave: 4, resolution: 256, ..AmplitudeSampling::default() };
        for k in [1i64, 3, 5] {
            let u = c.basis([k, 0]);
            let mut prev = 0.0;
            for j in (-1..6).rev() {
                let t = 2f64.powi(-j);
                let got = amplitude(&u, t, 1, p(2.0), &smp).unwrap();
                let closed = |r: f64| 2.0 * ((r * k as f64).min(PI) / 2.0).sin().abs();
                assert!(got.value <= closed(t) + 1e-12);
                assert!(got.radius <= t && got.radius > 0.0);
                if t * (k as f64) <= PI {
                    assert!((got.value - closed(got.radius)).abs() < 1e-12, "k={k} t={t}");
                }
                assert!(got.value >= prev);
                prev = got.value;
            }
        }
        assert_eq!(amplitude(&c.basis([2, 0]), 0.0, 1, p(1.0), &smp).unwrap().value, 0.0);
    }

    #[test]
    fn doubling_holds_on_lattice_steps() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let a = alg16().with_oversampling(4).unwrap();
        let unit = 2.0 * PI / a.resolution() as f64;
        for _ in 0..60 {
            let herm = r.gen_bool(0.5);
            let x = random_band_element(&a, &mut r, 3, 0.5, herm);
            let half = [r.gen_range(-20i64..=20) as f64 * unit, r.gen_range(-20i64..=20) as f64 * unit];
            let h = [2.0 * half[0], 2.0 * half[1]];
            let m = r.gen_range(1..=3);
            for pv in [1.0, 2.0, f64::INFINITY] {
                let rep = doubling_check(&x, &h, m, p(pv)).unwrap();
                assert!(rep.lattice_step);
                assert!(rep.pass, "{} > {}", rep.lhs, rep.rhs);
            }
        }
        assert!(doubling_check(&a.zero(), &[0.3, 0.1], 2, p(1.0)).unwrap().pass);
        // single mode, closed form on both sides
        let u = a.basis([2, 1]);
        let h = [0.2, 0.6];
        let rep = doubling_check(&u, &h, 2, p(2.0)).unwrap();
        let ang = 2.0 * h[0] + h[1];
        assert!((rep.lhs - (2.0 * (ang / 2.0).sin()).powi(2).abs()).abs() < 1e-12);
        assert!((rep.rhs - 4.0 * (2.0 * (ang / 4.0).sin()).powi(2).abs()).abs() < 1e-12);
    }

    #[test]
    fn block_difference_shapes() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let a = alg16();
        let x = random_band_element(&a, &mut r, 6, 0.0, true);
        assert!(block_difference_check(&a.one(), &[0.1, 0.0], 1, 2, p(2.0)).unwrap().is_none());
        let mut worst = 0.0f64;
        for k in 0..5 {
            for hn in [1e-4, 1e-2, 0.3, 2.0] {
                if let Some(v) = block_difference_check(&x, &[hn, 0.5 * hn], 2, k, p(2.0)).unwrap() {
                    assert!(v.is_finite());
                    worst = worst.max(v);
                }
            }
        }
        // at p = 2 the ratio is bounded by the multiplier sup: |e^{i⟨h,k⟩}−1|^m ≤ min(2^m, (|h||k|)^m)
        assert!(worst <= 16.0 * (1.0 + 1e-12));
    }

    #[test]
    fn heat_smoothing() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let a = alg16();
        let x = random_band_element(&a, &mut r, 5, 0.0, true);
        let ratio = heat_smoothing_check(&x, 1.0, 1.0, p(2.0), p(2.0), &[0.0]).unwrap();
        assert!(ratio <= 0.5 + 1e-12);
        let ratio = heat_smoothing_check(&x, 0.5, 2.0, p(2.0), p(2.0), &[0.01, 0.1, 1.0, 10.0]).unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
        let lo = besov_multiplier_norm(&x.heat(10.0).unwrap(), &BesovIndex::new(2.0, 2.0, 2.0).unwrap()).unwrap();
        let hi = besov_multiplier_norm(&x.heat(0.1).unwrap(), &BesovIndex::new(2.0, 2.0, 2.0).unwrap()).unwrap();
        assert!(lo < hi);
    }

    #[test]
    fn meyer_decomposition() {
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let a = alg16();
        assert!(meyer_residual(&a.zero(), 1.0, 8).unwrap() < 1e-15);
        let u = random_band_element(&a, &mut r, 4, 1.0, true);
        assert!(meyer_residual(&u, 0.0, 4).unwrap() < 1e-14);
        let r4 = meyer_residual(&u, 1.0, 4).unwrap();
        let r32 = meyer_residual(&u, 1.0, 32).unwrap();
        assert!(r32 < r4 || r4 < 1e-12);
        assert!(r32 < 1e-8, "{r32}");
    }

    #[test]
    fn paraproduct() {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let a = alg16();
        let u = random_band_element(&a, &mut r, 4, 0.5, true);
        let idx = BesovIndex::new(0.5, 2.0, 2.0).unwrap();
        let nb = top_block(&u) as usize + 1;
        let ones = alloc::vec![a.one(); nb];
        let seq = PsdoSymbolSequence { a: ones.clone(), b: ones, m_a: alloc::vec![1.0, 0.0], m_b: alloc::vec![1.0, 0.0] };
        let (t, ratio) = apply_paraproduct(&seq, &u, &idx).unwrap();
        assert!(t.sub(&u).unwrap().max_coeff() < 1e-12);
        assert!((ratio - 1.0).abs() < 1e-10);
        let (z, _) = apply_paraproduct(&seq, &a.zero(), &idx).unwrap();
        assert_eq!(z.max_coeff(), 0.0);
        let fam = PsdoSymbolSequence::meyer_family(&u, 1.0, 0.4, 1).unwrap();
        let (_, ratio) = apply_paraproduct(&fam, &u, &idx).unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
        let mut bad = fam.clone();
        bad.m_a[0] *= 0.5;
        assert!(matches!(apply_paraproduct(&bad, &u, &idx), Err(Error::CertificateViolation { .. })));
    }

    #[test]
    fn nonlinear_ratios() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let a = alg16();
        let u = random_band_element(&a, &mut r, 4, 0.5, true);
        let v = random_band_element(&a, &mut r, 4, 0.5, true);
        let idx = BesovIndex::new(0.5, 2.0, 2.0).unwrap();
        let id = SmoothSymbol::parse("x").unwrap();
        assert_eq!(boundedness_ratio(&id, &u, &idx).unwrap(), 1.0);
        let lin = SmoothSymbol::parse("-3*x").unwrap();
        assert!((boundedness_ratio(&lin, &u, &idx).unwrap() - 3.0).abs() < 1e-12);
        assert!((lipschitz_besov_ratio(&lin, &u, &v, &idx).unwrap() - 3.0).abs() < 1e-12);
        assert!((lipschitz_besov_ratio(&id, &u, &v, &idx).unwrap() - 1.0).abs() < 1e-12);
        let shifted = SmoothSymbol::parse("x + 1").unwrap();
        assert!(matches!(boundedness_ratio(&shifted, &u, &idx), Err(Error::SymbolHypothesisError(_))));
        assert!(matches!(lipschitz_besov_ratio(&id, &u, &u, &idx), Err(Error::DegenerateInput(_))));
        let th = SmoothSymbol::parse("tanh(x)").unwrap();
        let ratio = boundedness_ratio(&th, &u, &idx).unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
        // polynomial route agrees with the matrix functional calculus
        let cube = SmoothSymbol::parse("x^3 - 2*x").unwrap();
        let via_poly = u.apply_symbol(&cube).unwrap();
        let h = HermitianOperator::new(u.to_matrix().unwrap(), TraceMode::Normalized).unwrap();
        let m = crate::linalg::func_calc(&h, &SmoothSymbol::parse("x^3 - 2*x + 0*exp(x)").unwrap()).unwrap();
        let via_mat = TorusElement::from_matrix(&a, m.matrix()).unwrap();
        assert!(via_poly.sub(&via_mat).unwrap().max_coeff() < 1e-10);
        // finite ratio as the perturbation shrinks
        for eps in [1e-2, 1e-4, 1e-6] {
            let w = u.add(&a.basis([1, 0]).add(&a.basis([-1, 0])).unwrap().scale(C64::new(eps, 0.0))).unwrap();
            let q = lipschitz_besov_ratio(&th, &u, &w, &idx).unwrap();
            assert!(q.is_finite() && q < 10.0);
        }
    }

    #[test]
    fn reduction_bounded() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let a = alg16();
        let x = random_band_element(&a, &mut r, 6, 0.0, true);
        let idx = BesovIndex::new(1.5, 2.0, 2.0).unwrap();
        let q = reduction_ratio(&x, &[1, 0], &idx).unwrap();
        // |k_1| ≤ 2^{j+1} on block j, so the ratio is at most 2
        assert!(q <= 2.0 * (1.0 + 1e-12));
    }

    #[test]
    fn difference_norm_equivalence_smoke() {
        let mut r = ChaCha8Rng::seed_from_u64(10);
        let a = alg16();
        let smp = AmplitudeSampling::coarse();
        let ps = [p(1.0), p(2.0), p(f64::INFINITY)];
        for _ in 0..3 {
            let x = random_band_element(&a, &mut r, 3, 0.5, true);
            let model = prepare(&x, &smp).unwrap();
            let bn = BlockNorms::compute(&model, &ps).unwrap();
            for s in [0.5, 1.5] {
                let dd = DifferenceData::compute(&model, DifferenceOrder::default_for(s), &smp, &ps).unwrap();
                for (i, _) in ps.iter().enumerate() {
                    let mult = bn.besov(s, i, p(2.0));
                    let diff = dd.difference_norm(s, i, p(2.0)).unwrap();
                    let int = dd.integral_norm(s, i, p(2.0)).unwrap();
                    for v in [diff.value, int] {
                        let ratio = v / mult;
                        assert!(ratio > 0.05 && ratio < 20.0, "s={s} ratio={ratio}");
                    }
                }
            }
        }
    }
}
