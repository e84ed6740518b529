//! Multiple operator integrals on finite Hermitian matrices.
//!
//! In finite dimensions
//! `T^{A_0,…,A_n}_{F^[n]}(X_1,…,X_n) = Σ F^[n](λ^{(0)}_{i_0},…,λ^{(n)}_{i_n}) P_{i_0} X_1 P_{i_1} ⋯ X_n P_{i_n}`
//! is a finite sum over eigenprojections. It is evaluated in the eigenbases: with
//! `X̃_j = V_{j−1}* X_j V_j` the result is `V_0 R̃ V_n*` where `R̃` contracts the divided
//! difference tensor against the chain `X̃_1 ⋯ X̃_n`.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{schatten_norm, HermitianOperator, Matrix, SchattenIndex, SpectralDecomposition, TraceMode};
use crate::symbol::{DividedDifferences, SmoothSymbol};
use crate::{Error, Residual, Result, C64};

/// Default bound on `N^{n+2}` (dimension 32 at order 3).
pub const DEFAULT_WORK_CAP: u128 = 32u128.pow(5);

/// Anchors `A_0..A_n` and arguments `X_1..X_n` of a multiple operator integral.
#[derive(Debug, Clone)]
pub struct MoiOperands {
    anchors: Vec<HermitianOperator>,
    args: Vec<Matrix>,
}

impl MoiOperands {
    pub fn new(anchors: Vec<HermitianOperator>, args: Vec<Matrix>) -> Result<Self> {
        if anchors.len() != args.len() + 1 {
            return Err(Error::DimensionMismatch { expected: args.len() + 1, found: anchors.len() });
        }
        let n = anchors[0].dim();
        for d in anchors.iter().map(|a| a.dim()).chain(args.iter().map(|x| x.dim())) {
            if d != n {
                return Err(Error::DimensionMismatch { expected: n, found: d });
            }
        }
        Ok(Self { anchors, args })
    }

    pub fn order(&self) -> usize {
        self.args.len()
    }

    pub fn dim(&self) -> usize {
        self.anchors[0].dim()
    }

    pub fn anchors(&self) -> &[HermitianOperator] {
        &self.anchors
    }

    pub fn args(&self) -> &[Matrix] {
        &self.args
    }

    pub fn trace_mode(&self) -> TraceMode {
        self.anchors[0].trace_mode()
    }

    /// `W·A_j·W*` and `W·X_j·W*` for every operand.
    pub fn conjugated(&self, w: &Matrix) -> MoiOperands {
        let wa = w.adjoint();
        MoiOperands {
            anchors: self.anchors.iter().map(|a| a.conjugate_by(w)).collect(),
            args: self.args.iter().map(|x| w.matmul(x).matmul(&wa)).collect(),
        }
    }

    pub fn spectra(&self) -> Vec<SpectralDecomposition> {
        self.anchors.iter().map(|a| a.eig()).collect()
    }
}

fn check_budget(n: usize, order: usize, cap: u128) -> Result<()> {
    let work = (n as u128).saturating_pow(order as u32 + 2);
    if work > cap {
        return Err(Error::BudgetExceeded { work, cap });
    }
    Ok(())
}

/// Exact eigenprojection form of `T^{A_0..A_n}_{F^[n]}(X_1..X_n)`.
pub fn moi_schur(f: &SmoothSymbol, ops: &MoiOperands) -> Result<Matrix> {
    let spectra = ops.spectra();
    let refs: Vec<&SpectralDecomposition> = spectra.iter().collect();
    moi_schur_spectral(f, &refs, ops.args(), DEFAULT_WORK_CAP)
}

/// [`moi_schur`] with precomputed (possibly re-rotated) eigendecompositions.
pub fn moi_schur_spectral(
    f: &SmoothSymbol,
    spectra: &[&SpectralDecomposition],
    args: &[Matrix],
    work_cap: u128,
) -> Result<Matrix> {
    let n = args.len();
    if spectra.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, found: spectra.len() });
    }
    let dim = spectra[0].dim();
    if n > f.max_order() {
        return Err(Error::OrderExceeded { requested: n, max: f.max_order() });
    }
    check_budget(dim, n, work_cap)?;
    if n == 0 {
        return Ok(apply_symbol(f, spectra[0]));
    }
    let lambdas: Vec<&[f64]> = spectra.iter().map(|s| s.eigenvalues.as_slice()).collect();
    let dd = DividedDifferences::new(f, &lambdas)?;
    let xt: Vec<Matrix> = (0..n)
        .map(|j| {
            spectra[j]
                .eigenvectors
                .adjoint()
                .matmul(&args[j])
                .matmul(&spectra[j + 1].eigenvectors)
        })
        .collect();
    let rt = contract(&dd, &xt, dim);
    Ok(spectra[0].from_eigenbasis(&rt, spectra[n]))
}

/// `R̃[i_0, i_n] = Σ φ(i_0..i_n) X̃_1[i_0,i_1] ⋯ X̃_n[i_{n−1},i_n]`.
fn contract(dd: &DividedDifferences<'_>, xt: &[Matrix], dim: usize) -> Matrix {
    let n = xt.len();
    let mut out = Matrix::zeros(dim);
    let mut idx = vec![0usize; n + 1];
    // depth-first walk over i_0..i_{n−1}, carrying the running product
    fn walk(
        depth: usize,
        prefix: C64,
        idx: &mut [usize],
        dd: &DividedDifferences<'_>,
        xt: &[Matrix],
        dim: usize,
        out: &mut Matrix,
    ) {
        let n = xt.len();
        if depth == n {
            let i0 = idx[0];
            let last = idx[n - 1];
            let row = xt[n - 1].row(last);
            for (i_n, &x) in row.iter().enumerate() {
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                idx[n] = i_n;
                out[(i0, i_n)] += prefix * x * dd.entry(idx);
            }
            return;
        }
        let prev = idx[depth - 1];
        for i in 0..dim {
            let x = xt[depth - 1][(prev, i)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            idx[depth] = i;
            walk(depth + 1, prefix * x, idx, dd, xt, dim, out);
        }
    }
    if n == 1 {
        for i in 0..dim {
            for j in 0..dim {
                let x = xt[0][(i, j)];
                if x != C64::new(0.0, 0.0) {
                    out[(i, j)] = x * dd.entry(&[i, j]);
                }
            }
        }
        return out;
    }
    for i0 in 0..dim {
        idx[0] = i0;
        walk(1, C64::new(1.0, 0.0), &mut idx, dd, xt, dim, &mut out);
    }
    out
}

/// `F(A)` for a spectral decomposition; polynomial symbols use the same eigenbasis route.
fn apply_symbol(f: &SmoothSymbol, spec: &SpectralDecomposition) -> Matrix {
    spec.apply(|l| f.eval(l))
}

/// `F(H)` as a complex matrix; polynomials go through Horner's scheme in the algebra.
pub fn symbol_of(f: &SmoothSymbol, h: &HermitianOperator) -> Matrix {
    if let Some(c) = f.polynomial() {
        return crate::linalg::horner(h.matrix(), c);
    }
    apply_symbol(f, &h.eig())
}

/// Left-closed bin `[l/m, (l+1)/m)` containing `x`, returned as its left endpoint.
///
/// Values within a few ulps of a grid point are snapped to it so that eigenvalues sitting
/// on bin boundaries are not pushed into the lower bin by rounding.
pub fn bin_left_endpoint(x: f64, m: u32) -> f64 {
    let mf = m as f64;
    let t = x * mf;
    let r = t.round();
    let l = if (t - r).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) { r } else { t.floor() };
    l / mf
}

/// Binned discretization with `φ = F^[n]` evaluated at bin left endpoints.
pub fn moi_binned(f: &SmoothSymbol, ops: &MoiOperands, m: u32) -> Result<Matrix> {
    if m == 0 {
        return Err(Error::DegenerateInput("bin resolution must be positive"));
    }
    let spectra: Vec<SpectralDecomposition> =
        ops.spectra().iter().map(|s| s.map_eigenvalues(|l| bin_left_endpoint(l, m))).collect();
    let refs: Vec<&SpectralDecomposition> = spectra.iter().collect();
    moi_schur_spectral(f, &refs, ops.args(), DEFAULT_WORK_CAP)
}

/// `F(X) − F(Y) − T^{X,Y}_{F^[1]}(X − Y)` measured in `S_p`.
pub fn loewner_residual(
    f: &SmoothSymbol,
    x: &HermitianOperator,
    y: &HermitianOperator,
    p: SchattenIndex,
) -> Result<Residual> {
    perturbation_residual(f, 1, x, y, &[], &[], p)
}

/// Residual of the perturbation formula
/// `T^{…,A,…}_{F^[n]}(X⃗) − T^{…,B,…}_{F^[n]}(X⃗) = T^{…,A,B,…}_{F^[n+1]}(X_1,…,X_{i−1}, A−B, X_i,…,X_n)`.
///
/// `slot` is 1-based: `A` and `B` occupy anchor position `slot − 1` and `A − B` becomes the
/// `slot`-th argument. `others` are the remaining `n` anchors in order.
pub fn perturbation_residual(
    f: &SmoothSymbol,
    slot: usize,
    a: &HermitianOperator,
    b: &HermitianOperator,
    others: &[HermitianOperator],
    args: &[Matrix],
    p: SchattenIndex,
) -> Result<Residual> {
    let n = args.len();
    if others.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: others.len() });
    }
    if slot == 0 || slot > n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, found: slot });
    }
    if n + 1 > f.max_order() {
        return Err(Error::OrderExceeded { requested: n + 1, max: f.max_order() });
    }
    let mode = a.trace_mode();
    let spec_a = a.eig();
    let spec_b = b.eig();
    let spec_o: Vec<SpectralDecomposition> = others.iter().map(|o| o.eig()).collect();
    for m in [b.dim()].into_iter().chain(others.iter().map(|o| o.dim())).chain(args.iter().map(|x| x.dim())) {
        if m != a.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: m });
        }
    }

    fn with<'a>(
        others: &'a [SpectralDecomposition],
        slot: usize,
        anchor: &'a SpectralDecomposition,
    ) -> Vec<&'a SpectralDecomposition> {
        let mut v: Vec<&SpectralDecomposition> = others.iter().collect();
        v.insert(slot - 1, anchor);
        v
    }
    let ta = if n == 0 && f.polynomial().is_some() {
        symbol_of(f, a)
    } else {
        moi_schur_spectral(f, &with(&spec_o, slot, &spec_a), args, DEFAULT_WORK_CAP)?
    };
    let tb = if n == 0 && f.polynomial().is_some() {
        symbol_of(f, b)
    } else {
        moi_schur_spectral(f, &with(&spec_o, slot, &spec_b), args, DEFAULT_WORK_CAP)?
    };
    let mut anchors2: Vec<&SpectralDecomposition> = spec_o.iter().collect();
    anchors2.insert(slot - 1, &spec_b);
    anchors2.insert(slot - 1, &spec_a);
    let diff = a.matrix() - b.matrix();
    let mut args2: Vec<Matrix> = args.to_vec();
    args2.insert(slot - 1, diff);
    let tab = moi_schur_spectral(f, &anchors2, &args2, DEFAULT_WORK_CAP)?;

    let resid = &(&ta - &tb) - &tab;
    let value = schatten_norm(&resid, p, mode);
    let scale = schatten_norm(&ta, p, mode)
        .max(schatten_norm(&tb, p, mode))
        .max(schatten_norm(&tab, p, mode));
    Ok(Residual::new(value, scale))
}

/// `‖F(X) − F(Y)‖_p / ‖X − Y‖_p`.
pub fn lipschitz_ratio(
    f: &SmoothSymbol,
    x: &HermitianOperator,
    y: &HermitianOperator,
    p: SchattenIndex,
) -> Result<f64> {
    let mode = x.trace_mode();
    let den = schatten_norm(&(x.matrix() - y.matrix()), p, mode);
    if den == 0.0 {
        return Err(Error::DegenerateInput("X and Y coincide"));
    }
    let num = schatten_norm(&(&symbol_of(f, x) - &symbol_of(f, y)), p, mode);
    Ok(num / den)
}

/// `‖W·T(ops)·W* − T(W·ops·W*)‖_p` for a unitary `W`.
pub fn homomorphism_commutation_residual(
    f: &SmoothSymbol,
    w: &Matrix,
    ops: &MoiOperands,
    p: SchattenIndex,
) -> Result<Residual> {
    let defect = (&w.adjoint().matmul(w) - &Matrix::identity(w.dim())).frobenius_norm();
    if defect > 1e-10 {
        return Err(Error::NonUnitary(defect));
    }
    if w.dim() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), found: w.dim() });
    }
    let mode = ops.trace_mode();
    let t = moi_schur(f, ops)?;
    let lhs = w.matmul(&t).matmul(&w.adjoint());
    let rhs = moi_schur(f, &ops.conjugated(w))?;
    let value = schatten_norm(&(&lhs - &rhs), p, mode);
    let scale = schatten_norm(&lhs, p, mode).max(schatten_norm(&rhs, p, mode));
    Ok(Residual::new(value, scale))
}

/// Exponents `p_0..p_ℓ` with `Σ 1/p_k = 1/p`, plus the parameters used to choose them.
#[derive(Debug, Clone, PartialEq)]
pub struct HoelderTuple {
    pub exponents: Vec<SchattenIndex>,
    pub p: SchattenIndex,
    /// `δ_1..δ_ℓ` (empty when `p = ∞`).
    pub deltas: Vec<f64>,
    /// Slack `ε_k` left below `s` by each auxiliary smoothness.
    pub epsilons: Vec<f64>,
    /// `s_k = |α_k| + ε_k + d/p − d/p_k`.
    pub aux_smoothness: Vec<f64>,
}

impl HoelderTuple {
    pub fn new(exponents: Vec<SchattenIndex>, p: SchattenIndex) -> Result<Self> {
        let t = Self { exponents, p, deltas: Vec::new(), epsilons: Vec::new(), aux_smoothness: Vec::new() };
        let defect = t.defect();
        if defect > 1e-12 {
            return Err(Error::InfeasibleExponents(alloc::format!(
                "reciprocals sum off by {defect:e}"
            )));
        }
        Ok(t)
    }

    /// `|Σ 1/p_k − 1/p|`.
    pub fn defect(&self) -> f64 {
        (self.exponents.iter().map(|q| q.reciprocal()).sum::<f64>() - self.p.reciprocal()).abs()
    }
}

/// Hölder exponents for the terms `∂^{α_1}u ⋯ ∂^{α_ℓ}u` of the chain-rule expansion.
///
/// With `K = Σ|α_k|` and `δ = Σ δ_k` the exponents are `p_0 = Kp/δ` and
/// `p_k = Kp/(|α_k| − δ_k)`. Each `δ_k` is half of the largest value keeping
/// `s_k = |α_k| + ε_k + d(K − |α_k| + δ_k)/(Kp)` below `s`, and `ε_k` takes half of the
/// remaining room.
pub fn select_hoelder_exponents(
    s: f64,
    p: SchattenIndex,
    d: usize,
    alphas: &[Vec<usize>],
) -> Result<HoelderTuple> {
    let orders: Vec<usize> = alphas.iter().map(|a| a.iter().sum()).collect();
    if alphas.is_empty() || orders.contains(&0) {
        return Err(Error::InfeasibleExponents("multi-indices must be nonzero".into()));
    }
    let k: usize = orders.iter().sum();
    let df = d as f64;
    if !(s > df * p.reciprocal()) {
        return Err(Error::InfeasibleExponents(alloc::format!("need s > d/p, got s = {s}")));
    }
    if k as f64 > s.floor() {
        return Err(Error::InfeasibleExponents(alloc::format!("total order {k} exceeds floor(s)")));
    }
    let ell = alphas.len();
    if p.is_infinite() {
        let aux: Vec<f64> = orders.iter().map(|&o| o as f64).collect();
        return Ok(HoelderTuple {
            exponents: vec![SchattenIndex::INFINITY; ell + 1],
            p,
            deltas: vec![0.0; ell],
            epsilons: aux.iter().map(|a| s - a).collect(),
            aux_smoothness: aux,
        });
    }
    let kp = k as f64 * p.value();
    let mut deltas = Vec::with_capacity(ell);
    let mut eps = Vec::with_capacity(ell);
    let mut aux = Vec::with_capacity(ell);
    for &o in &orders {
        let a = o as f64;
        let base = a + df * (k as f64 - a) / kp;
        let slack = s - base;
        if !(slack > 0.0) {
            return Err(Error::InfeasibleExponents(alloc::format!(
                "no room below s = {s} for a factor of order {o}"
            )));
        }
        let delta = 0.5 * a.min(slack * kp / df);
        let e = 0.5 * (slack - df * delta / kp);
        deltas.push(delta);
        eps.push(e);
        aux.push(base + df * delta / kp + e);
    }
    let delta_total: f64 = deltas.iter().sum();
    let mut exponents = Vec::with_capacity(ell + 1);
    exponents.push(SchattenIndex::new(kp / delta_total)?);
    for (&o, &dk) in orders.iter().zip(&deltas) {
        exponents.push(SchattenIndex::new(kp / (o as f64 - dk))?);
    }
    let t = HoelderTuple { exponents, p, deltas, epsilons: eps, aux_smoothness: aux };
    if t.defect() > 1e-12 {
        return Err(Error::InfeasibleExponents("reciprocal sum drifted".into()));
    }
    Ok(t)
}
