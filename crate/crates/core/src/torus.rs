//! Rational noncommutative torus with Fourier modes `k ∈ [−N/2, N/2)^d`.
//!
//! Elements are coefficient arrays `x = Σ x̂(k) U^k` with the symmetric Weyl phase
//! `U^k = e^{iπθ k₁k₂} U₁^{k₁} U₂^{k₂}`, so that `(U^k)* = U^{−k}` and
//! `U^k U^l = e^{−iπθ(k₁l₂ − k₂l₁)} U^{k+l}`. Two backends realize the algebra:
//!
//! * `Commutative` (θ = 0): values on the `N^d` grid `x_j = 2πj/N`, obtained by FFT.
//! * `Matrix` (d = 2, θ = p/N): a faithful block-diagonal clock/shift representation of
//!   dimension `D = gN` with `g = gcd(p, N)`. It has `g²` blocks of size `N′ = N/g`; in block
//!   `(a, b)` the generators act as `U₁ = ω_a C′` and `U₂ = ω_b S′` with
//!   `ω_a = e^{2πia/N}`, clock `C′ = diag(e^{2πip′j/N′})` and shift `S′e_j = e_{j−1}`.
//!   At θ = 0 this is the diagonal matrix of grid values.
//!
//! Fourier multipliers (derivatives, translations, differences, heat flow, Littlewood–Paley
//! blocks) act on the representative integer value of each mode.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{func_calc, hermitian_eigenvalues, singular_values, HermitianOperator, Matrix, SchattenIndex, TraceMode};
use crate::symbol::{LPFilterFamily, SmoothSymbol};
use crate::{fft, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Commutative,
    Matrix,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Commutative => "commutative",
            Backend::Matrix => "matrix",
        }
    }
}

/// `d`-dimensional torus with `N` modes per axis and deformation `θ′₁₂ = p/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusAlgebra {
    d: usize,
    n: usize,
    theta_num: i64,
    backend: Backend,
    oversample: usize,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl TorusAlgebra {
    pub fn new(d: usize, n: usize, theta_num: i64, backend: Backend) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidAlgebra(alloc::format!("N must be even and at least 2, got {n}")));
        }
        if d != 1 && d != 2 {
            return Err(Error::InvalidAlgebra(alloc::format!("dimension {d} not supported (use 1 or 2)")));
        }
        if d == 1 && theta_num != 0 {
            return Err(Error::InvalidAlgebra("a one-dimensional torus has no deformation".into()));
        }
        if backend == Backend::Matrix && d != 2 {
            return Err(Error::BackendMismatch("the matrix backend needs d = 2"));
        }
        Ok(Self { d, n, theta_num: theta_num.rem_euclid(n as i64), backend, oversample: 1 })
    }

    pub fn commutative(d: usize, n: usize) -> Result<Self> {
        Self::new(d, n, 0, Backend::Commutative)
    }

    pub fn matrix(n: usize, theta_num: i64) -> Result<Self> {
        Self::new(2, n, theta_num, Backend::Matrix)
    }

    /// Same lattice and deformation with a different backend.
    pub fn with_backend(&self, backend: Backend) -> Result<Self> {
        let mut a = Self::new(self.d, self.n, self.theta_num, backend)?;
        a.oversample = self.oversample;
        Ok(a)
    }

    /// Realizes norms on the resolution `M = L·N` model (same θ, `L²` times as many blocks,
    /// grid of `M^d` points). Translations by `(2π/M)ℤ^d` are then exact automorphisms.
    /// Wrap-around products are not representable when `L > 1`.
    pub fn with_oversampling(&self, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidAlgebra("oversampling factor must be positive".into()));
        }
        Ok(Self { oversample: l, ..*self })
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    /// `M = L·N`; translations by multiples of `2π/M` are exact.
    pub fn resolution(&self) -> usize {
        self.oversample * self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta_num(&self) -> i64 {
        self.theta_num
    }

    /// `θ′₁₂ = p/N`.
    pub fn theta(&self) -> f64 {
        self.theta_num as f64 / self.n as f64
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn num_modes(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    fn half(&self) -> i64 {
        self.n as i64 / 2
    }

    /// Representative of `k mod N` in `[−N/2, N/2)`.
    #[inline]
    pub fn wrap(&self, k: i64) -> i64 {
        let n = self.n as i64;
        (k + n / 2).rem_euclid(n) - n / 2
    }

    pub fn in_band(&self, k: i64) -> bool {
        k >= -self.half() && k < self.half()
    }

    /// Storage index of a (representative) mode.
    #[inline]
    pub fn index(&self, k: [i64; 2]) -> usize {
        let h = self.half();
        let i1 = (k[0] + h) as usize;
        if self.d == 1 {
            i1
        } else {
            i1 * self.n + (k[1] + h) as usize
        }
    }

    /// Mode stored at `idx` (second component 0 when `d = 1`).
    #[inline]
    pub fn mode(&self, idx: usize) -> [i64; 2] {
        let h = self.half();
        if self.d == 1 {
            [idx as i64 - h, 0]
        } else {
            [(idx / self.n) as i64 - h, (idx % self.n) as i64 - h]
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        (0..self.num_modes()).map(move |i| self.mode(i))
    }

    /// `e^{iπ r/N}` for an integer `r`.
    #[inline]
    fn phase(&self, r: i64) -> C64 {
        let two_n = 2 * self.n as i64;
        let r = r.rem_euclid(two_n);
        let ang = PI * r as f64 / self.n as f64;
        C64::new(ang.cos(), ang.sin())
    }

    /// Phase `e^{iπθ(m₁m₂ − r₁r₂)}` relating the unwrapped mode `m` to its representative `r`.
    fn wrap_phase(&self, m: [i64; 2], r: [i64; 2]) -> C64 {
        if self.theta_num == 0 || self.d == 1 {
            return C64::new(1.0, 0.0);
        }
        self.phase(self.theta_num * (m[0] * m[1] - r[0] * r[1]))
    }

    pub fn zero(&self) -> TorusElement {
        TorusElement { alg: *self, coeffs: vec![C64::new(0.0, 0.0); self.num_modes()] }
    }

    pub fn one(&self) -> TorusElement {
        self.basis([0, 0])
    }

    /// The unitary `U^k`.
    pub fn basis(&self, k: [i64; 2]) -> TorusElement {
        let mut x = self.zero();
        let k = [self.wrap(k[0]), if self.d == 1 { 0 } else { self.wrap(k[1]) }];
        x.coeffs[self.index(k)] = C64::new(1.0, 0.0);
        x
    }

    pub fn element(&self, coeffs: Vec<C64>) -> Result<TorusElement> {
        if coeffs.len() != self.num_modes() {
            return Err(Error::DimensionMismatch { expected: self.num_modes(), found: coeffs.len() });
        }
        Ok(TorusElement { alg: *self, coeffs })
    }

    /// Dimension `D = L²·gcd(p, N)·N` of the matrix representation.
    pub fn matrix_dim(&self) -> usize {
        let l = self.layout();
        l.g * l.g * l.np
    }

    fn layout(&self) -> BlockLayout {
        let g = gcd(self.theta_num, self.n as i64) as usize;
        BlockLayout { g: g * self.oversample, np: self.n / g }
    }

    /// Number of grid points `M^d` of the commutative backend.
    pub fn grid_len(&self) -> usize {
        self.resolution().pow(self.d as u32)
    }

    fn grid_slot(&self, k: [i64; 2]) -> usize {
        let m = self.resolution() as i64;
        let i = k[0].rem_euclid(m) as usize;
        if self.d == 1 {
            i
        } else {
            i * m as usize + k[1].rem_euclid(m) as usize
        }
    }

    /// `e^{iπ r/M}` for `r ∈ [0, 2M)`.
    fn phase_table(&self) -> Vec<C64> {
        let m = self.resolution();
        (0..2 * m)
            .map(|r| {
                let ang = PI * r as f64 / m as f64;
                C64::new(ang.cos(), ang.sin())
            })
            .collect()
    }

    fn check_matrix(&self) -> Result<()> {
        if self.backend != Backend::Matrix {
            return Err(Error::BackendMismatch("operation needs the matrix backend"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BlockLayout {
    g: usize,
    np: usize,
}

/// Block-diagonal operator: `g²` square blocks of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub blocks: Vec<Matrix>,
}

impl BlockMatrix {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    pub fn matmul(&self, rhs: &BlockMatrix) -> BlockMatrix {
        BlockMatrix { blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a.matmul(b)).collect() }
    }

    pub fn adjoint(&self) -> BlockMatrix {
        BlockMatrix { blocks: self.blocks.iter().map(|b| b.adjoint()).collect() }
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.dim();
        let mut m = Matrix::zeros(n);
        let mut off = 0;
        for b in &self.blocks {
            let s = b.dim();
            for i in 0..s {
                for j in 0..s {
                    m[(off + i, off + j)] = b[(i, j)];
                }
            }
            off += s;
        }
        m
    }

    pub fn singular_values(&self) -> Vec<f64> {
        // Hermitian blocks (the common case) only need |eigenvalues|
        let mut all: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| {
                if b.hermitian_defect() <= 1e-14 {
                    hermitian_eigenvalues(b).into_iter().map(f64::abs).collect()
                } else {
                    singular_values(b)
                }
            })
            .collect();
        all.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
        all
    }

    /// Schatten norm under the normalized trace of the full matrix.
    pub fn schatten_norm(&self, p: SchattenIndex) -> f64 {
        let d = self.dim() as f64;
        if p == SchattenIndex::TWO {
            let s: f64 = self.blocks.iter().map(|b| b.frobenius_norm().powi(2)).sum();
            return (s / d).sqrt();
        }
        mean_power_norm(&self.singular_values(), d, p)
    }
}

/// Product mode: `Wrap` reduces modes mod `N`, `Checked` rejects products leaving the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulMode {
    Wrap,
    Checked,
}

/// Element `Σ x̂(k) U^k` of a [`TorusAlgebra`].
#[derive(Debug, Clone, PartialEq)]
pub struct TorusElement {
    alg: TorusAlgebra,
    coeffs: Vec<C64>,
}

impl TorusElement {
    pub fn algebra(&self) -> &TorusAlgebra {
        &self.alg
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, k: [i64; 2]) -> C64 {
        self.coeffs[self.alg.index(k)]
    }

    pub fn set_coeff(&mut self, k: [i64; 2], v: C64) {
        let i = self.alg.index(k);
        self.coeffs[i] = v;
    }

    /// Same coefficients viewed in another backend of the same lattice.
    pub fn with_backend(&self, backend: Backend) -> Result<TorusElement> {
        Ok(TorusElement { alg: self.alg.with_backend(backend)?, coeffs: self.coeffs.clone() })
    }

    /// Same coefficients on the oversampled model of [`TorusAlgebra::with_oversampling`].
    pub fn with_oversampling(&self, l: usize) -> Result<TorusElement> {
        Ok(TorusElement { alg: self.alg.with_oversampling(l)?, coeffs: self.coeffs.clone() })
    }

    fn same_algebra(&self, other: &TorusElement) -> Result<()> {
        if self.alg != other.alg {
            return Err(Error::InvalidAlgebra("operands live in different algebras".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &TorusElement) -> Result<TorusElement> {
        self.same_algebra(other)?;
        Ok(TorusElement { alg: self.alg, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &TorusElement) -> Result<TorusElement> {
        self.same_algebra(other)?;
        Ok(TorusElement { alg: self.alg, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() })
    }

    pub fn scale(&self, c: C64) -> TorusElement {
        TorusElement { alg: self.alg, coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    /// `τ(x) = x̂(0)`.
    pub fn trace(&self) -> C64 {
        self.coeff([0, 0])
    }

    /// `(Σ|x̂(k)|²)^{1/2}`, the normalized-trace 2-norm.
    pub fn l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `x* = Σ conj(x̂(k)) U^{−k}` with the wrap phase on Nyquist lines.
    pub fn adjoint(&self) -> TorusElement {
        let a = &self.alg;
        let mut out = a.zero();
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let k = a.mode(idx);
            let m = [-k[0], -k[1]];
            let r = [a.wrap(m[0]), a.wrap(m[1])];
            out.coeffs[a.index(r)] += c.conj() * a.wrap_phase(m, r);
        }
        out
    }

    /// `max_k |x̂(k) − (x*)^(k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let adj = self.adjoint();
        self.coeffs.iter().zip(&adj.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// `(x + x*)/2`.
    pub fn hermitian_part(&self) -> TorusElement {
        let adj = self.adjoint();
        TorusElement {
            alg: self.alg,
            coeffs: self.coeffs.iter().zip(&adj.coeffs).map(|(a, b)| (a + b) * 0.5).collect(),
        }
    }

    /// Highest `|k|_∞` with a nonzero coefficient.
    pub fn band(&self) -> i64 {
        let a = &self.alg;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != C64::new(0.0, 0.0))
            .map(|(i, _)| {
                let k = a.mode(i);
                k[0].abs().max(k[1].abs())
            })
            .max()
            .unwrap_or(0)
    }

    /// Twisted convolution.
    pub fn multiply(&self, other: &TorusElement, mode: MulMode) -> Result<TorusElement> {
        self.same_algebra(other)?;
        let a = &self.alg;
        let nz = |x: &TorusElement| -> Vec<(usize, [i64; 2], C64)> {
            x.coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != C64::new(0.0, 0.0))
                .map(|(i, &c)| (i, a.mode(i), c))
                .collect()
        };
        let xs = nz(self);
        let ys = nz(other);
        let mut out = a.zero();
        let p = a.theta_num;
        for &(_, k, ck) in &xs {
            for &(_, l, cl) in &ys {
                let m = [k[0] + l[0], k[1] + l[1]];
                let r = [a.wrap(m[0]), a.wrap(m[1])];
                if mode == MulMode::Checked && (r != m) {
                    return Err(Error::BandOverflow { mode: alloc::format!("{m:?}") });
                }
                let mut ph = C64::new(1.0, 0.0);
                if p != 0 && a.d == 2 {
                    ph = a.phase(-p * (k[0] * l[1] - k[1] * l[0])) * a.wrap_phase(m, r);
                }
                out.coeffs[a.index(r)] += ck * cl * ph;
            }
        }
        Ok(out)
    }

    /// Product computed in the backend: block matrices for `Matrix`, grid values for a
    /// commutative backend.
    pub fn multiply_backend(&self, other: &TorusElement) -> Result<TorusElement> {
        self.same_algebra(other)?;
        match self.alg.backend {
            Backend::Matrix => {
                let m = self.to_blocks()?.matmul(&other.to_blocks()?);
                TorusElement::from_blocks(&self.alg, &m)
            }
            Backend::Commutative => {
                if self.alg.theta_num != 0 {
                    return Err(Error::BackendMismatch("grid products need θ = 0"));
                }
                let u = self.grid_values()?;
                let v = other.grid_values()?;
                let w: Vec<C64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
                TorusElement::from_grid_values(&self.alg, &w)
            }
        }
    }

    /// Applies the Fourier multiplier `k ↦ m(k)`.
    pub fn multiplier(&self, mut m: impl FnMut([i64; 2]) -> C64) -> TorusElement {
        let a = &self.alg;
        TorusElement {
            alg: *a,
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| if c == C64::new(0.0, 0.0) { c } else { c * m(a.mode(i)) }).collect(),
        }
    }

    fn dot(&self, v: &[f64], k: [i64; 2]) -> f64 {
        let mut s = v[0] * k[0] as f64;
        if self.alg.d == 2 {
            s += v[1] * k[1] as f64;
        }
        s
    }

    /// `T_s(U^k) = e^{i⟨s,k⟩} U^k`.
    pub fn translate(&self, s: &[f64]) -> TorusElement {
        self.multiplier(|k| {
            let a = self.dot(s, k);
            C64::new(a.cos(), a.sin())
        })
    }

    /// `∂_j`: `U^k ↦ i k_j U^k` (axis `j` is 0-based).
    pub fn derive(&self, j: usize) -> TorusElement {
        self.multiplier(|k| C64::new(0.0, k[j] as f64))
    }

    /// `∂^α`.
    pub fn derive_multi(&self, alpha: &[usize]) -> TorusElement {
        self.multiplier(|k| {
            let mut z = C64::new(1.0, 0.0);
            for (j, &a) in alpha.iter().enumerate() {
                z *= C64::new(0.0, k[j] as f64).powu(a as u32);
            }
            z
        })
    }

    /// `Δ_h^m`: `U^k ↦ (e^{i⟨h,k⟩} − 1)^m U^k`.
    pub fn difference(&self, h: &[f64], m: u32) -> TorusElement {
        self.multiplier(|k| {
            let a = self.dot(h, k);
            (C64::new(a.cos(), a.sin()) - 1.0).powu(m)
        })
    }

    /// `e^{tΔ}`: `U^k ↦ e^{−t|k|²} U^k`.
    pub fn heat(&self, t: f64) -> Result<TorusElement> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.multiplier(|k| C64::new((-t * (k[0] * k[0] + k[1] * k[1]) as f64).exp(), 0.0)))
    }

    /// `△_j x` with the filter `φ_j(|k|)` of `lp`.
    pub fn lp_block(&self, j: i32, lp: &LPFilterFamily) -> TorusElement {
        self.multiplier(|k| C64::new(lp.filter_radial(j, mode_radius(k)), 0.0))
    }

    /// Values `Σ x̂(k) e^{i⟨k, x_j⟩}` on the grid `x_j = 2πj/M` (row-major for `d = 2`).
    pub fn grid_values(&self) -> Result<Vec<C64>> {
        let a = &self.alg;
        let m = a.resolution();
        let mut buf = vec![C64::new(0.0, 0.0); a.grid_len()];
        for (idx, &c) in self.coeffs.iter().enumerate() {
            buf[a.grid_slot(a.mode(idx))] = c;
        }
        if a.d == 1 {
            fft::inverse(&mut buf);
        } else {
            fft::transform_2d(&mut buf, m, m, fft::Direction::Inverse);
        }
        Ok(buf)
    }

    /// Fourier coefficients of grid values, keeping the modes of the algebra.
    pub fn from_grid_values(alg: &TorusAlgebra, vals: &[C64]) -> Result<TorusElement> {
        if vals.len() != alg.grid_len() {
            return Err(Error::DimensionMismatch { expected: alg.grid_len(), found: vals.len() });
        }
        let m = alg.resolution();
        let mut buf = vals.to_vec();
        if alg.d == 1 {
            fft::forward(&mut buf);
        } else {
            fft::transform_2d(&mut buf, m, m, fft::Direction::Forward);
        }
        let scale = 1.0 / alg.grid_len() as f64;
        let mut out = alg.zero();
        for idx in 0..alg.num_modes() {
            out.coeffs[idx] = buf[alg.grid_slot(alg.mode(idx))] * scale;
        }
        Ok(out)
    }

    /// Block-diagonal matrix image.
    pub fn to_blocks(&self) -> Result<BlockMatrix> {
        let a = &self.alg;
        a.check_matrix()?;
        let BlockLayout { g, np } = a.layout();
        let p = a.theta_num * a.oversample as i64;
        let nz: Vec<([i64; 2], C64)> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != C64::new(0.0, 0.0))
            .map(|(i, &c)| (a.mode(i), c))
            .collect();
        let table = a.phase_table();
        let two_m = table.len() as i64;
        let mut blocks = Vec::with_capacity(g * g);
        for ba in 0..g as i64 {
            for bb in 0..g as i64 {
                let mut m = Matrix::zeros(np);
                for &(k, c) in &nz {
                    let base = p * k[0] * k[1] + 2 * ba * k[0] + 2 * bb * k[1];
                    for col in 0..np as i64 {
                        let row = (col - k[1]).rem_euclid(np as i64);
                        let e = base + 2 * p * k[0] * row;
                        m[(row as usize, col as usize)] += c * table[e.rem_euclid(two_m) as usize];
                    }
                }
                blocks.push(m);
            }
        }
        Ok(BlockMatrix { blocks })
    }

    /// `x̂(k) = τ(A (U^k)*)` for a block-diagonal matrix.
    pub fn from_blocks(alg: &TorusAlgebra, m: &BlockMatrix) -> Result<TorusElement> {
        alg.check_matrix()?;
        let BlockLayout { g, np } = alg.layout();
        if m.blocks.len() != g * g || m.blocks.iter().any(|b| b.dim() != np) {
            return Err(Error::DimensionMismatch { expected: alg.matrix_dim(), found: m.dim() });
        }
        let p = alg.theta_num * alg.oversample as i64;
        let d = alg.matrix_dim() as f64;
        let table = alg.phase_table();
        let two_m = table.len() as i64;
        let mut out = alg.zero();
        for idx in 0..alg.num_modes() {
            let k = alg.mode(idx);
            let mut acc = C64::new(0.0, 0.0);
            for ba in 0..g as i64 {
                for bb in 0..g as i64 {
                    let blk = &m.blocks[(ba as usize) * g + bb as usize];
                    let base = p * k[0] * k[1] + 2 * ba * k[0] + 2 * bb * k[1];
                    for col in 0..np as i64 {
                        let row = (col - k[1]).rem_euclid(np as i64);
                        let e = base + 2 * p * k[0] * row;
                        acc += blk[(row as usize, col as usize)] * table[e.rem_euclid(two_m) as usize].conj();
                    }
                }
            }
            out.coeffs[idx] = acc / d;
        }
        Ok(out)
    }

    /// Dense matrix image of dimension [`TorusAlgebra::matrix_dim`].
    pub fn to_matrix(&self) -> Result<Matrix> {
        Ok(self.to_blocks()?.to_dense())
    }

    pub fn from_matrix(alg: &TorusAlgebra, m: &Matrix) -> Result<TorusElement> {
        alg.check_matrix()?;
        let BlockLayout { g, np } = alg.layout();
        if m.dim() != alg.matrix_dim() {
            return Err(Error::DimensionMismatch { expected: alg.matrix_dim(), found: m.dim() });
        }
        let blocks = (0..g * g)
            .map(|b| Matrix::from_fn(np, |i, j| m[(b * np + i, b * np + j)]))
            .collect();
        Self::from_blocks(alg, &BlockMatrix { blocks })
    }

    pub fn to_hermitian_operator(&self) -> Result<HermitianOperator> {
        HermitianOperator::new(self.to_matrix()?, TraceMode::Normalized)
    }

    /// `‖x‖_p` under the normalized trace; `p = 2` uses Parseval in either backend.
    pub fn lp_norm(&self, p: SchattenIndex) -> Result<f64> {
        if p == SchattenIndex::TWO {
            if self.alg.backend == Backend::Commutative && self.alg.theta_num != 0 {
                return Err(Error::BackendMismatch("commutative backend at θ ≠ 0"));
            }
            return Ok(self.l2());
        }
        self.lp_norm_spectral(p)
    }

    /// `‖x‖_p` from singular values (matrix backend) or grid values (commutative backend).
    pub fn lp_norm_spectral(&self, p: SchattenIndex) -> Result<f64> {
        match self.alg.backend {
            Backend::Matrix => Ok(self.to_blocks()?.schatten_norm(p)),
            Backend::Commutative => {
                if self.alg.theta_num != 0 {
                    return Err(Error::BackendMismatch("commutative backend at θ ≠ 0"));
                }
                let v = self.grid_values()?;
                let abs: Vec<f64> = v.iter().map(|z| z.norm()).collect();
                Ok(mean_power_norm(&abs, abs.len() as f64, p))
            }
        }
    }

    /// `‖x‖_p` for several exponents from one spectral computation.
    pub fn lp_norms(&self, ps: &[SchattenIndex]) -> Result<Vec<f64>> {
        if self.alg.backend == Backend::Commutative && self.alg.theta_num != 0 {
            return Err(Error::BackendMismatch("commutative backend at θ ≠ 0"));
        }
        let needs_spectrum = ps.iter().any(|&p| p != SchattenIndex::TWO);
        let (abs, denom) = if !needs_spectrum {
            (Vec::new(), 1.0)
        } else {
            match self.alg.backend {
                Backend::Matrix => {
                    let b = self.to_blocks()?;
                    (b.singular_values(), b.dim() as f64)
                }
                Backend::Commutative => {
                    let v = self.grid_values()?;
                    (v.iter().map(|z| z.norm()).collect::<Vec<_>>(), v.len() as f64)
                }
            }
        };
        Ok(ps
            .iter()
            .map(|&p| if p == SchattenIndex::TWO { self.l2() } else { mean_power_norm(&abs, denom, p) })
            .collect())
    }

    /// `F(x)` for Hermitian `x`: functional calculus on each block (matrix backend) or
    /// pointwise on grid values (commutative backend).
    /// Polynomials are evaluated by Horner's rule with wrap products, which is the same
    /// operator as the matrix functional calculus. Oversampled elements are evaluated on the
    /// base model.
    pub fn apply_symbol(&self, f: &SmoothSymbol) -> Result<TorusElement> {
        if self.alg.oversample > 1 {
            let l = self.alg.oversample;
            return self.with_oversampling(1)?.apply_symbol(f)?.with_oversampling(l);
        }
        let defect = self.hermitian_defect();
        if defect > 1e-10 * (1.0 + self.max_coeff()) {
            return Err(Error::NonHermitianInput(defect));
        }
        if let Some(c) = f.polynomial() {
            let one = self.alg.one();
            let mut acc = self.alg.zero();
            for &ck in c.iter().rev() {
                acc = acc.multiply(self, MulMode::Wrap)?.add(&one.scale(ck))?;
            }
            return Ok(acc);
        }
        match self.alg.backend {
            Backend::Matrix => {
                let blocks = self.to_blocks()?;
                let mut out = Vec::with_capacity(blocks.blocks.len());
                for b in blocks.blocks {
                    let h = HermitianOperator::symmetrized(b, TraceMode::Normalized);
                    out.push(func_calc(&h, f)?.into_matrix());
                }
                Ok(TorusElement::from_blocks(&self.alg, &BlockMatrix { blocks: out })?.hermitian_part())
            }
            Backend::Commutative => {
                if self.alg.theta_num != 0 {
                    return Err(Error::BackendMismatch("grid functional calculus needs θ = 0"));
                }
                let v = self.grid_values()?;
                let mut w = Vec::with_capacity(v.len());
                for z in v {
                    let y = f.eval(z.re);
                    if !y.re.is_finite() || y.im.abs() > 1e-12 * (1.0 + y.re.abs()) {
                        return Err(Error::SymbolDomainError(z.re));
                    }
                    w.push(C64::new(y.re, 0.0));
                }
                Ok(TorusElement::from_grid_values(&self.alg, &w)?.hermitian_part())
            }
        }
    }

    /// `‖x‖_∞` bound from coefficients: `Σ|x̂(k)|`.
    pub fn coefficient_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

/// `((1/denom) Σ v^p)^{1/p}`, or `max v` at `p = ∞`.
fn mean_power_norm(v: &[f64], denom: f64, p: SchattenIndex) -> f64 {
    let top = v.iter().cloned().fold(0.0, f64::max);
    if p.is_infinite() || top == 0.0 {
        return top;
    }
    let pv = p.value();
    let s: f64 = v.iter().map(|&x| (x / top).powf(pv)).sum();
    top * (s / denom).powf(1.0 / pv)
}

/// Euclidean length of a mode.
pub fn mode_radius(k: [i64; 2]) -> f64 {
    ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()
}

/// Random element supported on `|k|_∞ ≤ band` with coefficients decaying like
/// `(1 + |k|²)^{−decay/2}`; Hermitian when requested.
pub fn random_band_element<R: rand::Rng + ?Sized>(
    alg: &TorusAlgebra,
    rng: &mut R,
    band: i64,
    decay: f64,
    hermitian: bool,
) -> TorusElement {
    let band = band.min(alg.n as i64 / 2 - 1);
    let mut x = alg.zero();
    let kmax2 = if alg.d == 2 { band } else { 0 };
    for k1 in -band..=band {
        for k2 in -kmax2..=kmax2 {
            let w = (1.0 + (k1 * k1 + k2 * k2) as f64).powf(-decay / 2.0);
            let c = crate::corpus::complex_gaussian(rng) * w;
            x.set_coeff([k1, k2], c);
        }
    }
    if hermitian {
        x.hermitian_part()
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::build_littlewood_paley_inhomogeneous;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn close(a: &TorusElement, b: &TorusElement, tol: f64) -> bool {
        a.sub(b).unwrap().max_coeff() <= tol * (1.0 + a.max_coeff().max(b.max_coeff()))
    }

    #[test]
    fn rejects_bad_algebras() {
        assert!(TorusAlgebra::new(2, 7, 1, Backend::Matrix).is_err());
        assert!(TorusAlgebra::new(3, 8, 0, Backend::Commutative).is_err());
        assert!(TorusAlgebra::new(1, 8, 1, Backend::Commutative).is_err());
        assert!(matches!(TorusAlgebra::new(1, 8, 0, Backend::Matrix), Err(Error::BackendMismatch(_))));
    }

    #[test]
    fn matrix_images_of_basics() {
        for (n, p) in [(8, 1), (8, 2), (6, 3), (4, 0)] {
            let a = TorusAlgebra::matrix(n, p).unwrap();
            let d = a.matrix_dim();
            let one = a.one().to_matrix().unwrap();
            assert!((&one - &Matrix::identity(d)).max_abs() < 1e-15);
            // traces of basis elements
            for k in a.modes() {
                let m = a.basis(k).to_matrix().unwrap();
                let tr = m.trace() / d as f64;
                let expect = if k == [0, 0] { 1.0 } else { 0.0 };
                assert!((tr - expect).norm() < 1e-12, "n={n} p={p} k={k:?}");
                assert!(m.unitary_defect() < 1e-12);
            }
        }
        // gcd(p, N) = 1: U^{e_1} is the clock matrix
        let a = TorusAlgebra::matrix(6, 1).unwrap();
        let c = a.basis([1, 0]).to_matrix().unwrap();
        for j in 0..6 {
            let ang = 2.0 * PI * j as f64 / 6.0;
            assert!((c[(j, j)] - C64::new(ang.cos(), ang.sin())).norm() < 1e-14);
        }
        assert!(c.is_diagonal());
    }

    #[test]
    fn commutation_relation() {
        for (n, p) in [(8, 1), (8, 3), (8, 2), (6, 0)] {
            let a = TorusAlgebra::matrix(n, p).unwrap();
            let u1 = a.basis([1, 0]);
            let u2 = a.basis([0, 1]);
            let lhs = u2.multiply(&u1, MulMode::Wrap).unwrap();
            let rhs = u1.multiply(&u2, MulMode::Wrap).unwrap().scale(C64::from_polar(1.0, 2.0 * PI * a.theta()));
            assert!(close(&lhs, &rhs, 1e-14));
            // matrix route
            let m1 = u1.to_matrix().unwrap();
            let m2 = u2.to_matrix().unwrap();
            let sc = m2.matmul(&m1);
            let cs = m1.matmul(&m2).scale(C64::from_polar(1.0, 2.0 * PI * a.theta()));
            assert!((&sc - &cs).max_abs() < 1e-13);
        }
    }

    #[test]
    fn round_trips_and_hermitian_images() {
        let mut r = rng(1);
        for (n, p) in [(8, 1), (8, 2), (8, 0), (6, 3)] {
            let a = TorusAlgebra::matrix(n, p).unwrap();
            let x = random_band_element(&a, &mut r, n as i64 / 2 - 1, 0.0, false);
            let back = TorusElement::from_matrix(&a, &x.to_matrix().unwrap()).unwrap();
            assert!(close(&x, &back, 1e-12));
            let id = TorusElement::from_matrix(&a, &Matrix::identity(a.matrix_dim())).unwrap();
            assert!(close(&id, &a.one(), 1e-14));
            // full-lattice random element, including Nyquist lines
            let mut full = a.zero();
            for c in full.coeffs_mut() {
                *c = crate::corpus::complex_gaussian(&mut r);
            }
            let back = TorusElement::from_matrix(&a, &full.to_matrix().unwrap()).unwrap();
            assert!(close(&full, &back, 1e-12));
            let h = full.hermitian_part();
            assert!(h.to_matrix().unwrap().hermitian_defect() < 1e-12);
            let adj_m = full.to_matrix().unwrap().adjoint();
            let adj = TorusElement::from_matrix(&a, &adj_m).unwrap();
            assert!(close(&adj, &full.adjoint(), 1e-12));
            // (U^k)* = U^{-k} off the Nyquist lines
            let k = [1, -2];
            assert!(close(&a.basis(k).adjoint(), &a.basis([-1, 2]), 0.0));
        }
    }

    #[test]
    fn products_match_backends_and_associate() {
        let mut r = rng(2);
        for (n, p) in [(8, 1), (8, 2), (8, 0), (6, 1)] {
            let a = TorusAlgebra::matrix(n, p).unwrap();
            let x = random_band_element(&a, &mut r, 3, 0.0, false);
            let y = random_band_element(&a, &mut r, 3, 0.0, false);
            let z = random_band_element(&a, &mut r, 3, 0.0, false);
            let xy = x.multiply(&y, MulMode::Wrap).unwrap();
            assert!(close(&xy, &x.multiply_backend(&y).unwrap(), 1e-12), "n={n} p={p}");
            let l = xy.multiply(&z, MulMode::Wrap).unwrap();
            let rr = x.multiply(&y.multiply(&z, MulMode::Wrap).unwrap(), MulMode::Wrap).unwrap();
            assert!(close(&l, &rr, 1e-12));
            assert!(close(&x.multiply(&a.one(), MulMode::Checked).unwrap(), &x, 0.0));
            // traciality
            let yx = y.multiply(&x, MulMode::Wrap).unwrap();
            assert!((xy.trace() - yx.trace()).norm() < 1e-12);
        }
        // θ = 0: grid product equals the convolution route
        let c = TorusAlgebra::commutative(2, 8).unwrap();
        let x = random_band_element(&c, &mut r, 3, 0.0, false);
        let y = random_band_element(&c, &mut r, 3, 0.0, false);
        assert!(close(&x.multiply(&y, MulMode::Wrap).unwrap(), &x.multiply_backend(&y).unwrap(), 1e-12));
        let c1 = TorusAlgebra::commutative(1, 16).unwrap();
        let x = random_band_element(&c1, &mut r, 7, 0.0, false);
        let y = random_band_element(&c1, &mut r, 7, 0.0, false);
        assert!(close(&x.multiply(&y, MulMode::Wrap).unwrap(), &x.multiply_backend(&y).unwrap(), 1e-12));
    }

    #[test]
    fn checked_mode_detects_overflow() {
        let a = TorusAlgebra::matrix(8, 1).unwrap();
        let x = a.basis([3, 0]);
        assert!(matches!(x.multiply(&x, MulMode::Checked), Err(Error::BandOverflow { .. })));
        assert!(x.multiply(&x, MulMode::Wrap).is_ok());
    }

    #[test]
    fn multipliers() {
        let mut r = rng(3);
        let a = TorusAlgebra::matrix(16, 1).unwrap();
        let x = random_band_element(&a, &mut r, 3, 1.0, true);
        let y = random_band_element(&a, &mut r, 3, 1.0, true);
        // translation: isometric on the resolution lattice for every p, and at p = 2 always
        let s = [0.3, -1.1];
        assert!((x.translate(&s).l2() - x.l2()).abs() <= 1e-12 * x.l2());
        let step = 2.0 * PI / 16.0;
        let x4 = x.with_oversampling(4).unwrap();
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            let p = SchattenIndex::new(p).unwrap();
            let a1 = x.lp_norm_spectral(p).unwrap();
            let a2 = x.translate(&[step, -3.0 * step]).lp_norm_spectral(p).unwrap();
            assert!((a1 - a2).abs() <= 1e-11 * a1);
            let b1 = x4.lp_norm_spectral(p).unwrap();
            let b2 = x4.translate(&[0.25 * step, 1.75 * step]).lp_norm_spectral(p).unwrap();
            assert!((b1 - b2).abs() <= 1e-11 * b1);
        }
        assert!(close(&x.translate(&[0.0, 0.0]), &x, 0.0));
        let xy = x.multiply(&y, MulMode::Checked).unwrap();
        let t = x.translate(&s).multiply(&y.translate(&s), MulMode::Checked).unwrap();
        assert!(close(&xy.translate(&s), &t, 1e-12));
        // derivation: single mode and Leibniz
        let u = a.basis([2, -3]);
        assert!(close(&u.derive(1), &u.scale(C64::new(0.0, -3.0)), 0.0));
        assert_eq!(a.one().derive(0).max_coeff(), 0.0);
        for j in 0..2 {
            let lhs = xy.derive(j);
            let rhs = x.derive(j).multiply(&y, MulMode::Checked).unwrap()
                .add(&x.multiply(&y.derive(j), MulMode::Checked).unwrap()).unwrap();
            assert!(lhs.sub(&rhs).unwrap().max_coeff() <= 1e-11 * (1.0 + lhs.max_coeff()));
        }
        assert!(close(&x.derive_multi(&[1, 2]), &x.derive(0).derive(1).derive(1), 1e-14));
        // differences
        let h = [0.2, 0.7];
        assert_eq!(x.difference(&[0.0, 0.0], 1).max_coeff(), 0.0);
        let twice = x.difference(&h, 1).difference(&h, 1);
        let binom = x.translate(&[0.4, 1.4]).sub(&x.translate(&h).scale(C64::new(2.0, 0.0))).unwrap().add(&x).unwrap();
        assert!(close(&x.difference(&h, 2), &twice, 1e-13));
        assert!(close(&x.difference(&h, 2), &binom, 1e-13));
        // T_h is a *-automorphism, so Δ_h^m(x)* = Δ_h^m(x*)
        let lhs = x.difference(&h, 3).adjoint();
        let rhs = x.adjoint().difference(&h, 3);
        assert!(close(&lhs, &rhs, 1e-13));
        // heat
        assert!(close(&x.heat(0.0).unwrap(), &x, 0.0));
        let hh = x.heat(0.1).unwrap().heat(0.25).unwrap();
        assert!(close(&hh, &x.heat(0.35).unwrap(), 1e-12));
        assert!(matches!(x.heat(-1.0), Err(Error::NegativeTime(_))));
        assert!(x.heat(0.3).unwrap().is_hermitian(1e-14));
        // multipliers commute
        let lp = build_littlewood_paley_inhomogeneous(2);
        let ops: [&dyn Fn(&TorusElement) -> TorusElement; 5] = [
            &|e| e.translate(&s),
            &|e| e.derive(0),
            &|e| e.difference(&h, 2),
            &|e| e.lp_block(2, &lp),
            &|e| e.heat(0.05).unwrap(),
        ];
        for f in ops.iter() {
            for g in ops.iter() {
                assert!(close(&f(&g(&x)), &g(&f(&x)), 1e-12));
            }
        }
    }

    #[test]
    fn lp_blocks_reconstruct() {
        let mut r = rng(4);
        let lp = build_littlewood_paley_inhomogeneous(2);
        let a = TorusAlgebra::matrix(16, 1).unwrap();
        let x = random_band_element(&a, &mut r, 7, 0.0, true);
        let mut acc = a.zero();
        for j in 0..8 {
            acc = acc.add(&x.lp_block(j, &lp)).unwrap();
        }
        assert!(close(&acc, &x, 1e-11));
        for j in 1..6 {
            assert_eq!(a.one().lp_block(j, &lp).max_coeff(), 0.0);
        }
        let u = a.basis([4, 0]);
        for j in 0..8 {
            let nz = u.lp_block(j, &lp).max_coeff() > 0.0;
            assert!(!nz || (1..=3).contains(&j), "block {j}");
        }
        for j in 0..6 {
            for p in [1.0, 2.0, f64::INFINITY] {
                let p = SchattenIndex::new(p).unwrap();
                let b = x.lp_block(j, &lp).lp_norm(p).unwrap();
                let full = x.lp_norm(p).unwrap();
                assert!(b.is_finite() && full > 0.0);
            }
        }
    }

    #[test]
    fn norms() {
        let mut r = rng(5);
        for a in [TorusAlgebra::matrix(8, 1).unwrap(), TorusAlgebra::matrix(8, 2).unwrap()] {
            for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
                let p = SchattenIndex::new(p).unwrap();
                assert!((a.one().lp_norm(p).unwrap() - 1.0).abs() < 1e-12);
                assert!((a.basis([2, 3]).lp_norm(p).unwrap() - 1.0).abs() < 1e-12);
            }
            let x = random_band_element(&a, &mut r, 3, 0.0, false);
            let n1 = x.lp_norm(SchattenIndex::ONE).unwrap();
            let n2 = x.lp_norm(SchattenIndex::TWO).unwrap();
            let ni = x.lp_norm(SchattenIndex::INFINITY).unwrap();
            assert!(n2 * n2 <= n1 * ni * (1.0 + 1e-12));
            assert!(n1 <= n2 * (1.0 + 1e-12) && n2 <= ni * (1.0 + 1e-12));
            let via_sv = x.lp_norm_spectral(SchattenIndex::TWO).unwrap();
            assert!((via_sv - n2).abs() <= 1e-11 * n2);
            let hx = x.heat(0.2).unwrap();
            assert!((hx.lp_norm_spectral(SchattenIndex::TWO).unwrap() - hx.l2()).abs() <= 1e-11 * hx.l2());
        }
        let c = TorusAlgebra::new(2, 8, 1, Backend::Commutative).unwrap();
        assert!(matches!(c.one().lp_norm(SchattenIndex::ONE), Err(Error::BackendMismatch(_))));
    }

    #[test]
    fn backends_agree_at_zero_deformation() {
        let mut r = rng(6);
        let m = TorusAlgebra::matrix(8, 0).unwrap();
        let c = TorusAlgebra::commutative(2, 8).unwrap();
        let x = random_band_element(&m, &mut r, 3, 0.5, true);
        let y = random_band_element(&m, &mut r, 3, 0.5, true);
        let xc = x.with_backend(Backend::Commutative).unwrap();
        let yc = y.with_backend(Backend::Commutative).unwrap();
        assert_eq!(xc.algebra(), &c);
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            let p = SchattenIndex::new(p).unwrap();
            let a = x.lp_norm_spectral(p).unwrap();
            let b = xc.lp_norm_spectral(p).unwrap();
            assert!((a - b).abs() <= 1e-10 * a);
        }
        let pm = x.multiply_backend(&y).unwrap();
        let pc = xc.multiply_backend(&yc).unwrap();
        assert!(pm.coeffs().iter().zip(pc.coeffs()).all(|(a, b)| (a - b).norm() < 1e-10));
        let f = SmoothSymbol::parse("tanh(x) + x^2").unwrap();
        let fm = x.apply_symbol(&f).unwrap();
        let fc = xc.apply_symbol(&f).unwrap();
        assert!(fm.coeffs().iter().zip(fc.coeffs()).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn oversampled_models() {
        let mut r = rng(7);
        for (n, p) in [(8, 1), (8, 2), (8, 0)] {
            let a = TorusAlgebra::matrix(n, p).unwrap();
            let a3 = a.with_oversampling(3).unwrap();
            assert_eq!(a3.matrix_dim(), 9 * a.matrix_dim());
            for k in a3.modes() {
                let m = a3.basis(k).to_matrix().unwrap();
                let tr = m.trace() / a3.matrix_dim() as f64;
                let expect = if k == [0, 0] { 1.0 } else { 0.0 };
                assert!((tr - expect).norm() < 1e-12);
            }
            let x = random_band_element(&a3, &mut r, 1, 0.0, false);
            let y = random_band_element(&a3, &mut r, 1, 0.0, false);
            let back = TorusElement::from_matrix(&a3, &x.to_matrix().unwrap()).unwrap();
            assert!(close(&back, &x, 1e-12));
            let prod = x.multiply(&y, MulMode::Checked).unwrap();
            assert!(close(&prod, &x.multiply_backend(&y).unwrap(), 1e-12));
            // p = 2 norms do not depend on the resolution
            assert!((x.lp_norm_spectral(SchattenIndex::TWO).unwrap() - x.l2()).abs() < 1e-12 * x.l2());
        }
        let c = TorusAlgebra::commutative(1, 8).unwrap().with_oversampling(4).unwrap();
        let x = random_band_element(&c, &mut r, 3, 0.0, false);
        assert_eq!(x.grid_values().unwrap().len(), 32);
        let back = TorusElement::from_grid_values(&c, &x.grid_values().unwrap()).unwrap();
        assert!(close(&back, &x, 1e-13));
        let sh = x.translate(&[2.0 * PI * 5.0 / 32.0]);
        for p in [1.0, 3.0, f64::INFINITY] {
            let p = SchattenIndex::new(p).unwrap();
            let a1 = x.lp_norm_spectral(p).unwrap();
            assert!((a1 - sh.lp_norm_spectral(p).unwrap()).abs() <= 1e-12 * a1);
        }
    }
}
