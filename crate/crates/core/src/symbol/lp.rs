//! Littlewood–Paley filters built from the `exp(-1/z)` mollifier.

#[cfg(not(feature = "std"))]
use num_traits::Float;

fn mollifier(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else {
        (-1.0 / z).exp()
    }
}

/// Radial cutoff: `1` on `[0, 1]`, `0` on `[2, ∞)`, smooth and monotone in between.
pub fn psi(r: f64) -> f64 {
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let a = mollifier(2.0 - r);
    let b = mollifier(r - 1.0);
    a / (a + b)
}

/// Annular profile `φ(r) = ψ(r) − ψ(2r)`, supported in `[1/2, 2]`.
pub fn phi(r: f64) -> f64 {
    psi(r) - psi(2.0 * r)
}

/// Dyadic family of radial Fourier multipliers on `ℝ^d`.
///
/// Homogeneous: `φ_k(ξ) = φ(2^{-k}|ξ|)` for `k ∈ [k_min, k_max]`.
/// Non-homogeneous: `φ_0(ξ) = ψ(|ξ|)` and `φ_k(ξ) = φ(2^{-k}|ξ|)` for `k ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LPFilterFamily {
    pub dim: usize,
    pub homogeneous: bool,
    pub k_min: i32,
    pub k_max: i32,
}

impl LPFilterFamily {
    /// `φ_k` at radius `r = |ξ|`.
    pub fn filter_radial(&self, k: i32, r: f64) -> f64 {
        if !self.homogeneous {
            if k < 0 {
                return 0.0;
            }
            if k == 0 {
                return psi(r);
            }
        }
        phi(r * 2f64.powi(-k))
    }

    pub fn filter(&self, k: i32, xi: &[f64]) -> f64 {
        self.filter_radial(k, xi.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// Block indices whose filter can be nonzero at radius `r`.
    pub fn active_blocks(&self, r: f64) -> core::ops::RangeInclusive<i32> {
        if r == 0.0 {
            // the homogeneous family has no block at the origin
            #[allow(clippy::reversed_empty_ranges)]
            return if self.homogeneous { 1..=0 } else { 0..=0 };
        }
        let c = r.log2();
        let lo = (c - 1.0).floor() as i32;
        let hi = (c + 1.0).ceil() as i32;
        if self.homogeneous {
            lo.max(self.k_min)..=hi.min(self.k_max)
        } else {
            lo.max(0)..=hi.max(0).min(self.k_max)
        }
    }

    /// `Σ_k φ_k(r)` over the family's range.
    pub fn partition_sum(&self, r: f64) -> f64 {
        self.active_blocks(r).map(|k| self.filter_radial(k, r)).sum()
    }

    /// `sup |φ_k|`, which is also the `ℓ_∞` multiplier bound of each block.
    pub fn scalar_bound(&self) -> f64 {
        1.0
    }
}

/// Homogeneous family on `ℝ^d` with blocks `k ∈ [-64, 64]`.
pub fn build_littlewood_paley(d: usize) -> LPFilterFamily {
    LPFilterFamily { dim: d, homogeneous: true, k_min: -64, k_max: 64 }
}

/// Non-homogeneous family on `ℝ^d` with blocks `k ∈ [0, 64]`.
pub fn build_littlewood_paley_inhomogeneous(d: usize) -> LPFilterFamily {
    LPFilterFamily { dim: d, homogeneous: false, k_min: 0, k_max: 64 }
}
