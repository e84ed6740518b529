//! Dense complex linear algebra for small Hermitian problems.
//!
//! Eigendecompositions use cyclic complex Jacobi rotations and singular values use
//! one-sided (Hestenes) Jacobi; both keep high relative accuracy, which the
//! identity checks elsewhere in the crate rely on.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::symbol::SmoothSymbol;
use crate::{Error, Result, C64};

/// Relative Frobenius asymmetry tolerated by [`HermitianOperator::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Square complex matrix in row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Builds a matrix from row-major entries; `data.len()` must be a perfect square.
    pub fn from_vec(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Matrix { n, data: out }
    }

    pub fn scale(&self, c: C64) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().map(|&z| z * c).collect() }
    }

    pub fn scale_real(&self, c: f64) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().map(|&z| z * c).collect() }
    }

    /// `[self, rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &Matrix) -> Matrix {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[i * n + j] == ZERO))
    }

    /// `‖A − A*‖_F / ‖A‖_F`, zero for the zero matrix.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut num = 0.0;
        for i in 0..n {
            for j in 0..n {
                num += (self.data[i * n + j] - self.data[j * n + i].conj()).norm_sqr();
            }
        }
        let den = self.frobenius_norm();
        if den == 0.0 {
            0.0
        } else {
            num.sqrt() / den
        }
    }

    /// Largest entry of `|A*A − I|`.
    pub fn unitary_defect(&self) -> f64 {
        let g = self.adjoint().matmul(self);
        (&g - &Matrix::identity(self.n)).max_abs()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n);
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n);
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// Trace convention used for Schatten norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    /// `τ(1) = 1`: the counting trace divided by the dimension.
    #[default]
    Normalized,
    Counting,
}

impl TraceMode {
    pub fn weight(self, n: usize) -> f64 {
        match self {
            TraceMode::Normalized => 1.0 / n as f64,
            TraceMode::Counting => 1.0,
        }
    }
}

/// Schatten exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SchattenIndex(f64);

impl SchattenIndex {
    pub const ONE: SchattenIndex = SchattenIndex(1.0);
    pub const TWO: SchattenIndex = SchattenIndex(2.0);
    pub const INFINITY: SchattenIndex = SchattenIndex(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidSchattenIndex(p));
        }
        Ok(Self(p))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

/// Complex Hermitian matrix together with the trace convention used to measure it.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: Matrix,
    trace_mode: TraceMode,
}

impl HermitianOperator {
    /// Accepts `m` if it is Hermitian to [`HERMITIAN_TOL`] and symmetrizes it exactly.
    pub fn new(m: Matrix, trace_mode: TraceMode) -> Result<Self> {
        if m.dim() == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let defect = m.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NonHermitianInput(defect));
        }
        Ok(Self::symmetrized(m, trace_mode))
    }

    /// `(m + m*)/2`.
    pub fn symmetrized(m: Matrix, trace_mode: TraceMode) -> Self {
        let n = m.dim();
        let mut out = m;
        for i in 0..n {
            let d = out[(i, i)].re;
            out[(i, i)] = C64::new(d, 0.0);
            for j in i + 1..n {
                let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
                out[(i, j)] = avg;
                out[(j, i)] = avg.conj();
            }
        }
        Self { matrix: out, trace_mode }
    }

    pub fn from_real_diag(diag: &[f64], trace_mode: TraceMode) -> Self {
        Self { matrix: Matrix::from_real_diag(diag), trace_mode }
    }

    pub fn zeros(n: usize, trace_mode: TraceMode) -> Self {
        Self { matrix: Matrix::zeros(n), trace_mode }
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn trace_mode(&self) -> TraceMode {
        self.trace_mode
    }

    pub fn with_trace_mode(mut self, mode: TraceMode) -> Self {
        self.trace_mode = mode;
        self
    }

    pub fn eig(&self) -> SpectralDecomposition {
        jacobi_eigen(&self.matrix)
    }

    pub fn norm(&self, p: SchattenIndex) -> f64 {
        let n = self.dim();
        let w = self.trace_mode.weight(n);
        if p == SchattenIndex::TWO {
            return (w * self.matrix.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        }
        let ev = self.eig().eigenvalues;
        schatten_from_singular(ev.iter().map(|l| l.abs()), p, w)
    }

    /// Operator norm (largest absolute eigenvalue).
    pub fn operator_norm(&self) -> f64 {
        let ev = self.eig().eigenvalues;
        ev.first().map(|a| a.abs()).unwrap_or(0.0).max(ev.last().map(|b| b.abs()).unwrap_or(0.0))
    }

    /// `W·H·W*`; the result is re-symmetrized to absorb rounding.
    pub fn conjugate_by(&self, w: &Matrix) -> HermitianOperator {
        let m = w.matmul(&self.matrix).matmul(&w.adjoint());
        Self::symmetrized(m, self.trace_mode)
    }
}

/// Eigenvalues in ascending order with the unitary matrix of eigenvectors (as columns).
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
    permutation: bool,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V·diag(f(λ))·V*`.
    pub fn apply(&self, mut f: impl FnMut(f64) -> C64) -> Matrix {
        let vals: Vec<C64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.apply_values(&vals)
    }

    /// `V·diag(values)·V*` for precomputed diagonal values.
    pub fn apply_values(&self, vals: &[C64]) -> Matrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        if self.permutation {
            let mut out = Matrix::zeros(n);
            for (col, &val) in vals.iter().enumerate() {
                let row = (0..n).find(|&r| v[(r, col)] != ZERO).unwrap_or(col);
                out[(row, row)] = val;
            }
            return out;
        }
        let mut scaled = v.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= vals[j];
            }
        }
        scaled.matmul(&v.adjoint())
    }

    pub fn reconstruct(&self) -> Matrix {
        self.apply(|l| C64::new(l, 0.0))
    }

    /// `V*·X·V`: expresses `x` in the eigenbasis.
    pub fn to_eigenbasis(&self, x: &Matrix) -> Matrix {
        if self.permutation {
            let n = self.dim();
            let rows: Vec<usize> = (0..n)
                .map(|c| (0..n).find(|&r| self.eigenvectors[(r, c)] != ZERO).unwrap_or(c))
                .collect();
            return Matrix::from_fn(n, |i, j| x[(rows[i], rows[j])]);
        }
        self.eigenvectors.adjoint().matmul(x).matmul(&self.eigenvectors)
    }

    /// `V·X·W*`, mapping eigenbasis coordinates of `self` (rows) and `right` (columns) back.
    pub fn from_eigenbasis(&self, x: &Matrix, right: &SpectralDecomposition) -> Matrix {
        self.eigenvectors.matmul(x).matmul(&right.eigenvectors.adjoint())
    }

    /// Replaces the eigenvectors by `V·Q`; `Q` must be unitary and respect eigenvalue multiplicities.
    pub fn rotate_basis(&self, q: &Matrix) -> SpectralDecomposition {
        SpectralDecomposition {
            eigenvalues: self.eigenvalues.clone(),
            eigenvectors: self.eigenvectors.matmul(q),
            permutation: false,
        }
    }

    /// `‖VΛV* − H‖_F / ‖H‖_F`.
    pub fn residual(&self, h: &Matrix) -> f64 {
        let den = h.frobenius_norm();
        let diff = (&self.reconstruct() - h).frobenius_norm();
        if den == 0.0 {
            diff
        } else {
            diff / den
        }
    }

    /// Maps every eigenvalue through `q`, keeping the eigenvectors.
    pub fn map_eigenvalues(&self, q: impl Fn(f64) -> f64) -> SpectralDecomposition {
        SpectralDecomposition {
            eigenvalues: self.eigenvalues.iter().map(|&l| q(l)).collect(),
            eigenvectors: self.eigenvectors.clone(),
            permutation: self.permutation,
        }
    }
}

/// Eigendecomposition of a Hermitian operator.
pub fn eig_hermitian(h: &HermitianOperator) -> SpectralDecomposition {
    h.eig()
}

/// Eigendecomposition of a raw matrix, rejecting inputs that are not Hermitian.
pub fn eig_hermitian_matrix(m: &Matrix) -> Result<SpectralDecomposition> {
    let h = HermitianOperator::new(m.clone(), TraceMode::Normalized)?;
    Ok(h.eig())
}

fn jacobi_eigen(m: &Matrix) -> SpectralDecomposition {
    let n = m.dim();
    let mut a = m.data.clone();
    let mut v = Matrix::identity(n);
    let mut rotated = false;
    let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();

    for _sweep in 0..80 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if off == 0.0 || off <= 1e-34 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                if mag < 1e-18 * (app.abs() + aqq.abs()) {
                    a[p * n + q] = ZERO;
                    a[q * n + p] = ZERO;
                    continue;
                }
                rotated = true;
                let phase = apq / mag;
                let zeta = (aqq - app) / (2.0 * mag);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase.conj() * s; // s·e^{-iφ}
                let cp = phase.conj() * c; // c·e^{-iφ}
                // columns: A ← A·G
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * c - akq * sp;
                    a[k * n + q] = akp * s + akq * cp;
                }
                // rows: A ← G*·A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = apk * c - aqk * sp.conj();
                    a[q * n + k] = apk * s + aqk * cp.conj();
                }
                a[p * n + p] = C64::new(app - t * mag, 0.0);
                a[q * n + q] = C64::new(aqq + t * mag, 0.0);
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                for k in 0..n {
                    let vkp = v.data[k * n + p];
                    let vkq = v.data[k * n + q];
                    v.data[k * n + p] = vkp * c - vkq * sp;
                    v.data[k * n + q] = vkp * s + vkq * cp;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.partial_cmp(&a[j * n + j].re).unwrap_or(core::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&i| a[i * n + i].re).collect();
    let eigenvectors = Matrix::from_fn(n, |r, c| v.data[r * n + order[c]]);
    SpectralDecomposition { eigenvalues, eigenvectors, permutation: !rotated }
}

/// Eigenvalues of a Hermitian matrix in ascending order, without eigenvectors.
///
/// Householder reduction to a tridiagonal matrix, whose complex off-diagonal is replaced by
/// its modulus (a diagonal unitary similarity), then implicit QL. Only the lower triangle
/// is read.
pub fn hermitian_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.dim();
    let mut a = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| a[i * n + k]).collect();
        let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xn == 0.0 {
            continue;
        }
        let x0 = x[0].norm();
        let phase = if x0 == 0.0 { C64::new(1.0, 0.0) } else { x[0] / x0 };
        let alpha = -phase * xn;
        let mut u = x;
        u[0] -= alpha;
        let un = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if un == 0.0 {
            continue;
        }
        for z in &mut u {
            *z /= un;
        }
        // trailing block B ← B − 2(u w* + w u*) with p = Bu, w = p − (u*p)u
        let off = k + 1;
        let size = n - off;
        let p: Vec<C64> = (0..size)
            .map(|i| {
                let row = (off + i) * n + off;
                a[row..row + size].iter().zip(&u).map(|(x, y)| x * y).sum()
            })
            .collect();
        let kk: C64 = u.iter().zip(&p).map(|(ui, pi)| ui.conj() * pi).sum();
        let w: Vec<C64> = p.iter().zip(&u).map(|(pi, ui)| pi - kk * ui).collect();
        for i in 0..size {
            let row = (off + i) * n + off;
            for j in 0..size {
                a[row + j] -= (u[i] * w[j].conj() + w[i] * u[j].conj()) * 2.0;
            }
        }
        a[off * n + k] = alpha;
        a[k * n + off] = alpha.conj();
        for i in off + 1..n {
            a[i * n + k] = ZERO;
            a[k * n + i] = ZERO;
        }
    }
    for i in 0..n {
        d[i] = a[i * n + i].re;
        if i + 1 < n {
            e[i] = a[(i + 1) * n + i].norm();
        }
    }
    tridiagonal_ql(&mut d, &mut e);
    d.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    d
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix; `e[i]` couples
/// `d[i]` and `d[i + 1]`. Eigenvalues are left in `d`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l || iter == 64 {
                break;
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let n = a.dim();
    // column-major copy so that columns are contiguous
    let mut cols: Vec<C64> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cols.push(a.data[i * n + j]);
        }
    }
    if a.is_diagonal() {
        let mut sv: Vec<f64> = (0..n).map(|i| a.data[i * n + i].norm()).collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
        return sv;
    }
    let mut norms: Vec<f64> = (0..n).map(|j| col_norm_sqr(&cols[j * n..(j + 1) * n])).collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let (cp, cq) = two_cols(&mut cols, n, p, q);
                let mut gamma = ZERO;
                for (x, y) in cp.iter().zip(cq.iter()) {
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let yq = *y * phase;
                    let xp = *x;
                    *x = xp * c - yq * s;
                    *y = xp * s + yq * c;
                }
                norms[p] = (alpha - t * g).max(0.0);
                norms[q] = beta + t * g;
            }
        }
        if !rotated {
            break;
        }
        // refresh to shed accumulated drift of the norm updates
        for (j, v) in norms.iter_mut().enumerate() {
            *v = col_norm_sqr(&cols[j * n..(j + 1) * n]);
        }
    }
    let mut sv: Vec<f64> = norms.iter().map(|x| x.sqrt()).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    sv
}

fn col_norm_sqr(c: &[C64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

fn two_cols(cols: &mut [C64], n: usize, p: usize, q: usize) -> (&mut [C64], &mut [C64]) {
    debug_assert!(p < q);
    let (lo, hi) = cols.split_at_mut(q * n);
    (&mut lo[p * n..(p + 1) * n], &mut hi[..n])
}

fn schatten_from_singular(sv: impl Iterator<Item = f64>, p: SchattenIndex, w: f64) -> f64 {
    if p.is_infinite() {
        return sv.fold(0.0, f64::max);
    }
    let pv = p.value();
    if pv == 1.0 {
        return w * sv.sum::<f64>();
    }
    let sv: Vec<f64> = sv.collect();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    // factor out the largest singular value to avoid overflow for large p
    let s: f64 = sv.iter().map(|&x| (x / top).powf(pv)).sum();
    top * (w * s).powf(1.0 / pv)
}

/// `(w·Σ σ_i^p)^{1/p}` with `w = 1/n` for the normalized trace; `p = ∞` gives `max σ_i`.
pub fn schatten_norm(a: &Matrix, p: SchattenIndex, mode: TraceMode) -> f64 {
    let w = mode.weight(a.dim());
    if p == SchattenIndex::TWO {
        return (w * a.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    }
    schatten_from_singular(singular_values(a).into_iter(), p, w)
}

/// Borel functional calculus `F(H) = V·diag(F(λ_i))·V*` for a real-valued symbol.
///
/// Polynomial symbols are evaluated by Horner's scheme in the matrix algebra instead,
/// so that e.g. `F(x) = x` returns `H` bit for bit.
pub fn func_calc(h: &HermitianOperator, f: &SmoothSymbol) -> Result<HermitianOperator> {
    if let Some(coeffs) = f.polynomial() {
        if coeffs.iter().any(|c| c.im != 0.0) {
            return Err(Error::SymbolDomainError(0.0));
        }
        let m = horner(h.matrix(), coeffs);
        return Ok(HermitianOperator::symmetrized(m, h.trace_mode()));
    }
    let spec = h.eig();
    let mut vals = Vec::with_capacity(spec.dim());
    for &l in &spec.eigenvalues {
        let v = f.eval(l);
        if !v.re.is_finite() || !v.im.is_finite() || v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
            return Err(Error::SymbolDomainError(l));
        }
        vals.push(C64::new(v.re, 0.0));
    }
    Ok(HermitianOperator::symmetrized(spec.apply_values(&vals), h.trace_mode()))
}

/// Functional calculus for complex-valued functions; the output is a normal matrix.
pub fn func_calc_complex(spec: &SpectralDecomposition, f: impl FnMut(f64) -> C64) -> Matrix {
    spec.apply(f)
}

/// Evaluates `Σ c_k M^k` by Horner's scheme.
pub fn horner(m: &Matrix, coeffs: &[C64]) -> Matrix {
    let n = m.dim();
    let mut acc = Matrix::zeros(n);
    for (k, &c) in coeffs.iter().enumerate().rev() {
        if k + 1 != coeffs.len() {
            acc = acc.matmul(m);
        }
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    acc
}
