//! Grid estimates of symbol-space norms.
//!
//! Fourier transforms use `𝓕f(ξ) = ∫ f(x) e^{-ixξ} dx` and are approximated by the
//! trapezoid rule on `[-L, L)` evaluated with an FFT.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{LPFilterFamily, SmoothSymbol, Window};
use crate::{fft, Error, Result, C64};

/// `max |F|` on the window grid.
pub fn sup_norm(f: &SmoothSymbol, window: &Window) -> f64 {
    window.points().map(|x| f.eval(x).norm()).fold(0.0, f64::max)
}

/// `max |F(x_{i+1}) − F(x_i)| / (x_{i+1} − x_i)` over adjacent grid points.
pub fn lipschitz_norm(f: &SmoothSymbol, window: &Window) -> f64 {
    let pts: Vec<f64> = window.points().collect();
    let vals: Vec<C64> = pts.iter().map(|&x| f.eval(x)).collect();
    let mut best = 0.0f64;
    for i in 1..pts.len() {
        let dx = pts[i] - pts[i - 1];
        if dx > 0.0 {
            best = best.max((vals[i] - vals[i - 1]).norm() / dx);
        }
    }
    best
}

/// `sup_{1≤k≤n} max |F^(k)|` on the window grid (`n = 0` gives `max |F|`).
pub fn cb_norm(f: &SmoothSymbol, n: usize, window: &Window) -> Result<f64> {
    if n > f.max_order() {
        return Err(Error::OrderExceeded { requested: n, max: f.max_order() });
    }
    if n == 0 {
        return Ok(sup_norm(f, window));
    }
    let mut best = 0.0f64;
    for x in window.points() {
        let j = f.taylor(x, n + 1);
        for k in 1..=n {
            best = best.max(j.derivative(k).norm());
        }
    }
    Ok(best)
}

/// Uniform grid on `[-L, L)` used for Fourier-side norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    pub half_width: f64,
    /// Number of samples; a power of two keeps the transform fast.
    pub samples: usize,
    /// Largest admissible relative mass in the outer tenth of the spatial window and of
    /// the resolved frequency range.
    pub tail_tol: f64,
}

impl Default for SpectralGrid {
    fn default() -> Self {
        Self { half_width: 32.0, samples: 8192, tail_tol: 1e-6 }
    }
}

impl SpectralGrid {
    pub fn refined(&self) -> Self {
        Self { half_width: self.half_width, samples: self.samples * 2, tail_tol: self.tail_tol }
    }

    pub fn widened(&self) -> Self {
        Self { half_width: self.half_width * 2.0, samples: self.samples * 2, tail_tol: self.tail_tol }
    }

    fn step(&self) -> f64 {
        2.0 * self.half_width / self.samples as f64
    }

    fn x(&self, j: usize) -> f64 {
        -self.half_width + self.step() * j as f64
    }

    /// Angular frequency of FFT bin `k`.
    fn xi(&self, k: usize) -> f64 {
        let m = self.samples as i64;
        let kk = if (k as i64) < m / 2 { k as i64 } else { k as i64 - m };
        PI * kk as f64 / self.half_width
    }

    fn derivative_samples(&self, f: &SmoothSymbol, n: usize) -> Vec<C64> {
        (0..self.samples).map(|j| f.taylor(self.x(j), n + 1).derivative(n)).collect()
    }

    fn check_spatial_tail(&self, vals: &[C64]) -> Result<()> {
        let total: f64 = vals.iter().map(|v| v.norm()).sum();
        if total == 0.0 {
            return Ok(());
        }
        let edge = 0.9 * self.half_width;
        let tail: f64 = vals
            .iter()
            .enumerate()
            .filter(|(j, _)| self.x(*j).abs() > edge)
            .map(|(_, v)| v.norm())
            .sum();
        let rel = tail / total;
        if rel > self.tail_tol {
            return Err(Error::TailMassError { tail: rel, tolerance: self.tail_tol });
        }
        Ok(())
    }

    fn check_spectral_tail(&self, spec: &[C64]) -> Result<()> {
        let total: f64 = spec.iter().map(|v| v.norm()).sum();
        if total == 0.0 {
            return Ok(());
        }
        let cut = 0.9 * PI * self.samples as f64 / (2.0 * self.half_width);
        let tail: f64 =
            spec.iter().enumerate().filter(|(k, _)| self.xi(*k).abs() > cut).map(|(_, v)| v.norm()).sum();
        let rel = tail / total;
        if rel > self.tail_tol {
            return Err(Error::TailMassError { tail: rel, tolerance: self.tail_tol });
        }
        Ok(())
    }
}

/// `‖F‖_∞ + ‖𝓕(F^(n))‖_1`.
pub fn wiener_norm(f: &SmoothSymbol, n: usize, grid: &SpectralGrid) -> Result<f64> {
    if n > f.max_order() {
        return Err(Error::OrderExceeded { requested: n, max: f.max_order() });
    }
    let mut g = grid.derivative_samples(f, n);
    grid.check_spatial_tail(&g)?;
    let sup = if n == 0 {
        g.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else {
        (0..grid.samples).map(|j| f.eval(grid.x(j)).norm()).fold(0.0, f64::max)
    };
    fft::forward(&mut g);
    grid.check_spectral_tail(&g)?;
    // |𝓕g(ξ_k)| = h·|A_k| and Δξ = π/L, so h·Δξ = 2π/M
    let l1: f64 = g.iter().map(|a| a.norm()).sum::<f64>() * 2.0 * PI / grid.samples as f64;
    Ok(sup + l1)
}

/// Truncated modified Besov norm with the discarded part reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct BesovEstimate {
    /// `‖F^(n)‖_∞ + Σ_{|k|≤J} ‖𝓕^{-1}(F̂ φ_k)‖_∞`.
    pub value: f64,
    /// Upper estimate `(2π)^{-1}‖F̂·(1 − Σ_{|k|≤J} φ_k)‖_1` of what the missing blocks add.
    pub tail: f64,
    /// `(k, ‖𝓕^{-1}(F̂ φ_k)‖_∞)` for every block included.
    pub blocks: Vec<(i32, f64)>,
}

/// `‖F^(n)‖_∞ + Σ_{|k| ≤ J} ‖𝓕^{-1}(F̂ φ_k)‖_∞` for an integrable symbol.
///
/// Symbols with non-negligible mass near the edge of the spatial window are rejected
/// with [`Error::TailMassError`]: their Fourier transform is not a function that the grid
/// can resolve.
pub fn modified_besov_norm(
    f: &SmoothSymbol,
    n: usize,
    lp: &LPFilterFamily,
    j: u32,
    grid: &SpectralGrid,
) -> Result<BesovEstimate> {
    if n > f.max_order() {
        return Err(Error::OrderExceeded { requested: n, max: f.max_order() });
    }
    let m = grid.samples;
    let vals: Vec<C64> = (0..m).map(|k| f.eval(grid.x(k))).collect();
    grid.check_spatial_tail(&vals)?;
    let deriv_sup = grid.derivative_samples(f, n).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut spec = vals;
    fft::forward(&mut spec);
    grid.check_spectral_tail(&spec)?;

    let j = j as i32;
    let (lo, hi) = if lp.homogeneous { (-j, j) } else { (0, j) };
    let mut blocks = Vec::new();
    let mut value = deriv_sup;
    let mut covered = alloc::vec![0.0f64; m];
    let mut buf = alloc::vec![C64::new(0.0, 0.0); m];
    for k in lo..=hi {
        let mut any = false;
        for (idx, slot) in buf.iter_mut().enumerate() {
            let w = lp.filter_radial(k, grid.xi(idx).abs());
            covered[idx] += w;
            any |= w != 0.0 && spec[idx] != C64::new(0.0, 0.0);
            *slot = spec[idx] * w;
        }
        let sup = if any {
            fft::inverse(&mut buf);
            buf.iter().map(|v| v.norm()).fold(0.0, f64::max) / m as f64
        } else {
            0.0
        };
        value += sup;
        blocks.push((k, sup));
    }
    let tail: f64 = spec
        .iter()
        .zip(&covered)
        .map(|(a, &c)| a.norm() * (1.0 - c).max(0.0))
        .sum::<f64>()
        / m as f64;
    Ok(BesovEstimate { value, tail, blocks })
}
