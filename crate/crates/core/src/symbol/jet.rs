//! Truncated Taylor series ("jets") with complex coefficients.
//!
//! A jet of length `n` stores `c_k = f^(k)(x)/k!` for `k < n`. Arithmetic follows the
//! usual power-series recurrences, so derivatives of composite expressions come out
//! exactly up to rounding.

use core::ops::{Add, Mul, Neg, Sub};

use crate::C64;

/// Highest number of stored coefficients (derivative orders `0..MAX_JET`).
pub const MAX_JET: usize = 16;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [C64; MAX_JET],
    n: usize,
}

impl Jet {
    pub fn constant(v: C64, n: usize) -> Self {
        let mut c = [ZERO; MAX_JET];
        c[0] = v;
        Self { c, n: n.clamp(1, MAX_JET) }
    }

    /// The identity function `x ↦ x` expanded at `x0`.
    pub fn variable(x0: f64, n: usize) -> Self {
        let mut j = Self::constant(C64::new(x0, 0.0), n);
        if j.n > 1 {
            j.c[1] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn from_coeffs(coeffs: &[C64]) -> Self {
        let n = coeffs.len().clamp(1, MAX_JET);
        let mut c = [ZERO; MAX_JET];
        c[..coeffs.len().min(n)].copy_from_slice(&coeffs[..coeffs.len().min(n)]);
        Self { c, n }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn value(&self) -> C64 {
        self.c[0]
    }

    /// Taylor coefficients `f^(k)(x)/k!`.
    #[inline]
    pub fn coeffs(&self) -> &[C64] {
        &self.c[..self.n]
    }

    /// `f^(k)(x)`, zero beyond the stored length.
    pub fn derivative(&self, k: usize) -> C64 {
        if k >= self.n {
            return ZERO;
        }
        self.c[k] * factorial(k)
    }

    pub fn scale(mut self, s: C64) -> Self {
        for v in &mut self.c[..self.n] {
            *v *= s;
        }
        self
    }

    fn empty(n: usize) -> Self {
        Self { c: [ZERO; MAX_JET], n }
    }

    pub fn recip(&self) -> Self {
        Jet::constant(C64::new(1.0, 0.0), self.n).div(self)
    }

    pub fn div(&self, b: &Jet) -> Jet {
        let n = self.n.min(b.n);
        let mut q = Jet::empty(n);
        let b0 = b.c[0];
        for k in 0..n {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= b.c[j] * q.c[k - j];
            }
            q.c[k] = acc / b0;
        }
        q
    }

    pub fn powi(&self, e: i32) -> Jet {
        if e < 0 {
            return self.powi(-e).recip();
        }
        let mut base = *self;
        let mut acc = Jet::constant(C64::new(1.0, 0.0), self.n);
        let mut e = e as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let n = self.n;
        let mut y = Jet::empty(n);
        y.c[0] = self.c[0].exp();
        for k in 1..n {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.c[j] * y.c[k - j] * j as f64;
            }
            y.c[k] = acc / k as f64;
        }
        y
    }

    /// `(sin a, cos a)`.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.n;
        let mut s = Jet::empty(n);
        let mut c = Jet::empty(n);
        s.c[0] = self.c[0].sin();
        c.c[0] = self.c[0].cos();
        for k in 1..n {
            let mut as_ = ZERO;
            let mut ac = ZERO;
            for j in 1..=k {
                let w = self.c[j] * j as f64;
                as_ += w * c.c[k - j];
                ac -= w * s.c[k - j];
            }
            s.c[k] = as_ / k as f64;
            c.c[k] = ac / k as f64;
        }
        (s, c)
    }

    pub fn tanh(&self) -> Jet {
        // y' = (1 - y²) a'
        let n = self.n;
        let mut y = Jet::empty(n);
        let mut w = Jet::empty(n); // 1 - y²
        y.c[0] = self.c[0].tanh();
        w.c[0] = C64::new(1.0, 0.0) - y.c[0] * y.c[0];
        for k in 1..n {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.c[j] * w.c[k - j] * j as f64;
            }
            y.c[k] = acc / k as f64;
            let mut sq = ZERO;
            for j in 0..=k {
                sq += y.c[j] * y.c[k - j];
            }
            w.c[k] = -sq;
        }
        y
    }

    pub fn sqrt(&self) -> Jet {
        let n = self.n;
        let mut y = Jet::empty(n);
        y.c[0] = self.c[0].sqrt();
        for k in 1..n {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= y.c[j] * y.c[k - j];
            }
            y.c[k] = acc / (y.c[0] * 2.0);
        }
        y
    }

    pub fn ln(&self) -> Jet {
        let n = self.n;
        let mut y = Jet::empty(n);
        y.c[0] = self.c[0].ln();
        let a0 = self.c[0];
        for k in 1..n {
            let mut acc = self.c[k] * k as f64;
            for j in 1..k {
                acc -= y.c[j] * self.c[k - j] * j as f64;
            }
            y.c[k] = acc / (a0 * k as f64);
        }
        y
    }

    /// `|a|` for real-valued `a`, using the sign of the real part at the expansion point
    /// (`sign(0) = +1`).
    pub fn abs(&self) -> Jet {
        if self.c[0].re < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Smooth cutoff `ψ(|a|)`: one on `[0,1]`, zero from `2` on.
    pub fn bump(&self) -> Jet {
        let r = self.abs();
        let r0 = r.c[0].re;
        if r0 <= 1.0 {
            return Jet::constant(C64::new(1.0, 0.0), self.n);
        }
        if r0 >= 2.0 {
            return Jet::constant(ZERO, self.n);
        }
        let one = Jet::constant(C64::new(1.0, 0.0), self.n);
        let two = Jet::constant(C64::new(2.0, 0.0), self.n);
        let gl = mollifier(&(two - r));
        let gr = mollifier(&(r - one));
        gl.div(&(gl + gr))
    }
}

/// `exp(-1/z)` for `z > 0`.
fn mollifier(z: &Jet) -> Jet {
    (-z.recip()).exp()
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let n = self.n.min(rhs.n);
        let mut out = Jet::empty(n);
        for k in 0..n {
            out.c[k] = self.c[k] + rhs.c[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let n = self.n.min(rhs.n);
        let mut out = Jet::empty(n);
        for k in 0..n {
            out.c[k] = self.c[k] - rhs.c[k];
        }
        out
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for v in &mut self.c[..self.n] {
            *v = -*v;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.n.min(rhs.n);
        let mut out = Jet::empty(n);
        for k in 0..n {
            let mut acc = ZERO;
            for j in 0..=k {
                acc += self.c[j] * rhs.c[k - j];
            }
            out.c[k] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: f64, tol: f64) -> bool {
        (a - C64::new(b, 0.0)).norm() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn exp_derivatives() {
        let j = Jet::variable(0.3, 8).scale(C64::new(2.0, 0.0)).exp();
        for k in 0..8 {
            assert!(close(j.derivative(k), 2f64.powi(k as i32) * (0.6f64).exp(), 1e-13));
        }
    }

    #[test]
    fn sin_cos_tanh() {
        let x = 0.7;
        let (s, c) = Jet::variable(x, 6).sin_cos();
        assert!(close(s.derivative(1), x.cos(), 1e-14));
        assert!(close(s.derivative(3), -x.cos(), 1e-14));
        assert!(close(c.derivative(2), -x.cos(), 1e-14));
        let t = Jet::variable(x, 4).tanh();
        let th = x.tanh();
        let sech2 = 1.0 - th * th;
        assert!(close(t.derivative(1), sech2, 1e-14));
        assert!(close(t.derivative(2), -2.0 * th * sech2, 1e-14));
        assert!(close(t.derivative(3), -2.0 * sech2 * (sech2 - 2.0 * th * th), 1e-13));
    }

    #[test]
    fn sqrt_ln_div() {
        let x = 2.5;
        let s = Jet::variable(x, 4).sqrt();
        assert!(close(s.derivative(1), 0.5 / x.sqrt(), 1e-14));
        assert!(close(s.derivative(2), -0.25 * x.powf(-1.5), 1e-14));
        let l = Jet::variable(x, 4).ln();
        assert!(close(l.derivative(3), 2.0 / x.powi(3), 1e-14));
        let r = Jet::variable(x, 4).recip();
        assert!(close(r.derivative(2), 2.0 / x.powi(3), 1e-14));
        let p = Jet::variable(x, 5).powi(-2);
        assert!(close(p.derivative(1), -2.0 / x.powi(3), 1e-14));
    }

    #[test]
    fn bump_profile() {
        assert_eq!(Jet::variable(0.5, 3).bump().value(), C64::new(1.0, 0.0));
        assert_eq!(Jet::variable(-2.5, 3).bump().value(), C64::new(0.0, 0.0));
        let mid = Jet::variable(1.5, 3).bump().value().re;
        assert!((mid - 0.5).abs() < 1e-15);
        let b = Jet::variable(1.3, 2).bump();
        let h = 1e-5;
        let fd = (Jet::variable(1.3 + h, 1).bump().value().re - Jet::variable(1.3 - h, 1).bump().value().re)
            / (2.0 * h);
        assert!((b.derivative(1).re - fd).abs() < 1e-8);
    }
}
