//! Scalar symbols `F: ℝ → ℂ` with derivatives, divided differences, symbol-space norms,
//! localization and Littlewood–Paley filters.

mod divided;
mod expr;
mod jet;
mod lp;
mod norms;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

pub use divided::{complete_homogeneous, divided_diff, divided_diff_tensor, DividedDifferences, Tensor};
pub use expr::{Expr, Func};
pub use jet::{factorial, Jet, MAX_JET};
pub use lp::{build_littlewood_paley, build_littlewood_paley_inhomogeneous, phi, psi, LPFilterFamily};
pub use norms::{
    cb_norm, lipschitz_norm, modified_besov_norm, sup_norm, wiener_norm, BesovEstimate, SpectralGrid,
};

use crate::{Error, Result, C64};

/// Sampling window `[lo, hi]` used by grid-based norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

impl Window {
    pub const DEFAULT_SAMPLES: usize = 4096;

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, samples: Self::DEFAULT_SAMPLES }
    }

    pub fn symmetric(half_width: f64) -> Self {
        Self::new(-half_width, half_width)
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(2);
        self
    }

    /// Grid points including both endpoints.
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.samples.max(2);
        let step = (self.hi - self.lo) / (n - 1) as f64;
        (0..n).map(move |i| if i + 1 == n { self.hi } else { self.lo + step * i as f64 })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

impl Default for Window {
    fn default() -> Self {
        Self::symmetric(4.0)
    }
}

/// Smooth cutoff at scale `M`: `φ_M(x) = ψ(|x|/M)`, or the constant one for `M = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BumpLocalizer {
    Finite(f64),
    Infinite,
}

impl BumpLocalizer {
    pub fn new(m: f64) -> Self {
        if m.is_infinite() {
            BumpLocalizer::Infinite
        } else {
            BumpLocalizer::Finite(m)
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            BumpLocalizer::Infinite => 1.0,
            BumpLocalizer::Finite(m) => psi(x.abs() / m),
        }
    }
}

type NumericFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Expr(Arc<Expr>),
    /// Derivatives by fourth-order central differences.
    Numeric { f: NumericFn, scale: f64 },
    Localized { inner: Arc<SmoothSymbol>, m: f64 },
    Scaled { inner: Arc<SmoothSymbol>, c: C64 },
}

/// A scalar symbol with derivatives up to `max_order`.
#[derive(Clone)]
pub struct SmoothSymbol {
    kind: Kind,
    max_order: usize,
    window: Window,
    poly: Option<Arc<Vec<C64>>>,
    label: String,
}

/// Default highest derivative order for parsed symbols.
pub const DEFAULT_MAX_ORDER: usize = 8;
/// Highest order available for finite-difference symbols.
pub const NUMERIC_MAX_ORDER: usize = 4;

impl SmoothSymbol {
    /// Parses an expression (see [`Expr`]) with the default order and window.
    pub fn parse(src: &str) -> Result<Self> {
        Self::parse_with(src, DEFAULT_MAX_ORDER, Window::default())
    }

    pub fn parse_with(src: &str, max_order: usize, window: Window) -> Result<Self> {
        Self::from_expr(Expr::parse(src)?, max_order, window)
    }

    pub fn from_expr(expr: Expr, max_order: usize, window: Window) -> Result<Self> {
        if max_order + 1 > MAX_JET {
            return Err(Error::OrderExceeded { requested: max_order, max: MAX_JET - 1 });
        }
        let poly = expr.as_polynomial().map(Arc::new);
        let label = expr.to_string();
        let s = Self { kind: Kind::Expr(Arc::new(expr)), max_order, window, poly, label };
        s.validate()?;
        Ok(s)
    }

    /// Polynomial `Σ c_k x^k`.
    pub fn polynomial_from(coeffs: &[f64]) -> Self {
        let mut e = Expr::Const(C64::new(0.0, 0.0));
        for (k, &c) in coeffs.iter().enumerate() {
            let mono = Expr::Mul(
                alloc::boxed::Box::new(Expr::Const(C64::new(c, 0.0))),
                alloc::boxed::Box::new(Expr::Pow(alloc::boxed::Box::new(Expr::X), k as i32)),
            );
            e = Expr::Add(alloc::boxed::Box::new(e), alloc::boxed::Box::new(mono));
        }
        let max_order = (coeffs.len() + 1).clamp(DEFAULT_MAX_ORDER, MAX_JET - 1);
        Self::from_expr(e, max_order, Window::default()).expect("polynomials validate")
    }

    /// Symbol given only by values; derivatives up to order 4 use central differences
    /// with step `h_k = ε^{1/(4+k)}·scale`.
    pub fn numeric(
        f: impl Fn(f64) -> C64 + Send + Sync + 'static,
        max_order: usize,
        scale: f64,
        window: Window,
        label: &str,
    ) -> Result<Self> {
        if max_order > NUMERIC_MAX_ORDER {
            return Err(Error::OrderExceeded { requested: max_order, max: NUMERIC_MAX_ORDER });
        }
        Ok(Self {
            kind: Kind::Numeric { f: Arc::new(f), scale },
            max_order,
            window,
            poly: None,
            label: label.to_string(),
        })
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    /// Changes the derivative budget; closed forms are re-checked on the current window.
    pub fn with_max_order(mut self, max_order: usize) -> Result<Self> {
        let cap = match self.kind {
            Kind::Numeric { .. } => NUMERIC_MAX_ORDER,
            _ => MAX_JET - 1,
        };
        if max_order > cap {
            return Err(Error::OrderExceeded { requested: max_order, max: cap });
        }
        self.max_order = max_order;
        self.validate()?;
        Ok(self)
    }

    #[inline]
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    #[inline]
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Polynomial coefficients (lowest degree first) when the symbol is a polynomial.
    pub fn polynomial(&self) -> Option<&[C64]> {
        self.poly.as_deref().map(|v| v.as_slice())
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.kind {
            Kind::Expr(e) => Some(e),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        match &self.kind {
            Kind::Expr(e) => e.value(x),
            Kind::Numeric { f, .. } => f(x),
            Kind::Localized { inner, m } => inner.eval(x) * psi(x.abs() / m),
            Kind::Scaled { inner, c } => inner.eval(x) * c,
        }
    }

    /// Taylor coefficients `F^(k)(x)/k!` for `k < n`, with `n` capped at `max_order + 1`.
    pub fn taylor(&self, x: f64, n: usize) -> Jet {
        let n = n.clamp(1, self.max_order + 1);
        match &self.kind {
            Kind::Expr(e) => e.jet(x, n),
            Kind::Numeric { f, scale } => {
                let mut c = [C64::new(0.0, 0.0); MAX_JET];
                for (k, slot) in c.iter_mut().enumerate().take(n) {
                    *slot = stencil_derivative(f.as_ref(), x, k, *scale) / factorial(k);
                }
                Jet::from_coeffs(&c[..n])
            }
            Kind::Localized { inner, m } => {
                let b = Jet::variable(x, n).scale(C64::new(1.0 / m, 0.0)).bump();
                inner.taylor(x, n) * b
            }
            Kind::Scaled { inner, c } => inner.taylor(x, n).scale(*c),
        }
    }

    /// `F^(k)(x)`.
    pub fn derivative(&self, k: usize, x: f64) -> Result<C64> {
        if k > self.max_order {
            return Err(Error::OrderExceeded { requested: k, max: self.max_order });
        }
        if k == 0 {
            return Ok(self.eval(x));
        }
        Ok(self.taylor(x, k + 1).derivative(k))
    }

    /// `c·F`.
    pub fn scaled(&self, c: C64) -> SmoothSymbol {
        let label = alloc::format!("({c})*({})", self.label);
        match &self.kind {
            Kind::Expr(e) => {
                let expr = Expr::Mul(alloc::boxed::Box::new(Expr::Const(c)), alloc::boxed::Box::new((**e).clone()));
                let poly = expr.as_polynomial().map(Arc::new);
                SmoothSymbol {
                    kind: Kind::Expr(Arc::new(expr)),
                    max_order: self.max_order,
                    window: self.window,
                    poly,
                    label,
                }
            }
            _ => SmoothSymbol {
                kind: Kind::Scaled { inner: Arc::new(self.clone()), c },
                max_order: self.max_order,
                window: self.window,
                poly: self.poly.as_ref().map(|p| Arc::new(p.iter().map(|&a| a * c).collect())),
                label,
            },
        }
    }

    /// Compares every closed-form derivative with a fourth-order central difference of the
    /// previous one at 32 points of the window.
    fn validate(&self) -> Result<()> {
        let expr = match &self.kind {
            Kind::Expr(e) => e,
            _ => return Ok(()),
        };
        if self.poly.is_some() || self.max_order == 0 {
            return Ok(());
        }
        const POINTS: usize = 32;
        let n = self.max_order + 1;
        let w = self.window;
        let xs: Vec<f64> =
            (0..POINTS).map(|j| w.lo + (w.hi - w.lo) * (j as f64 + 0.5) / POINTS as f64).collect();
        let jets: Vec<Jet> = xs.iter().map(|&x| expr.jet(x, n)).collect();
        for k in 1..n {
            let scale = jets.iter().map(|j| j.derivative(k).norm()).fold(0.0, f64::max);
            for (&x, jet) in xs.iter().zip(&jets) {
                let exact = jet.derivative(k);
                let tol = 1e-6 * exact.norm().max(scale).max(1e-300);
                let ok = [1e-3, 1e-4].iter().any(|&rel| {
                    let h = rel * x.abs().max(1.0);
                    let d = |t: f64| expr.jet(t, k).derivative(k - 1);
                    let approx =
                        (d(x - 2.0 * h) - d(x - h) * 8.0 + d(x + h) * 8.0 - d(x + 2.0 * h)) / (12.0 * h);
                    (approx - exact).norm() <= tol
                });
                if !ok {
                    return Err(Error::DerivativeMismatch { order: k, at: x });
                }
            }
        }
        Ok(())
    }
}

/// Fourth-order central stencils for derivatives `0..=4`.
fn stencil_derivative(f: &dyn Fn(f64) -> C64, x: f64, k: usize, scale: f64) -> C64 {
    if k == 0 {
        return f(x);
    }
    let h = f64::EPSILON.powf(1.0 / (4.0 + k as f64)) * scale;
    let v = |j: i32| f(x + j as f64 * h);
    match k {
        1 => (v(-2) - v(-1) * 8.0 + v(1) * 8.0 - v(2)) / (12.0 * h),
        2 => (-v(-2) + v(-1) * 16.0 - v(0) * 30.0 + v(1) * 16.0 - v(2)) / (12.0 * h * h),
        3 => (v(-3) - v(-2) * 8.0 + v(-1) * 13.0 - v(1) * 13.0 + v(2) * 8.0 - v(3)) / (8.0 * h.powi(3)),
        4 => {
            (-(v(-3) + v(3)) / 6.0 + (v(-2) + v(2)) * 2.0 - (v(-1) + v(1)) * 6.5 + v(0) * (28.0 / 3.0))
                / h.powi(4)
        }
        _ => C64::new(f64::NAN, f64::NAN),
    }
}

impl fmt::Debug for SmoothSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothSymbol")
            .field("label", &self.label)
            .field("max_order", &self.max_order)
            .field("window", &self.window)
            .finish()
    }
}

impl fmt::Display for SmoothSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// `F·φ_M`; `M = ∞` returns `F` unchanged. The window shrinks to `[-2M, 2M]`.
pub fn localize(f: &SmoothSymbol, m: BumpLocalizer) -> SmoothSymbol {
    let m = match m {
        BumpLocalizer::Infinite => return f.clone(),
        BumpLocalizer::Finite(m) => m,
    };
    let window = Window { lo: -2.0 * m, hi: 2.0 * m, samples: f.window.samples };
    let label = alloc::format!("({})*bump(x/{m})", f.label);
    match &f.kind {
        Kind::Expr(e) => {
            use alloc::boxed::Box;
            let cut = Expr::Call(
                Func::Bump,
                Box::new(Expr::Div(Box::new(Expr::X), Box::new(Expr::Const(C64::new(m, 0.0))))),
            );
            let expr = Expr::Mul(Box::new((**e).clone()), Box::new(cut));
            SmoothSymbol { kind: Kind::Expr(Arc::new(expr)), max_order: f.max_order, window, poly: None, label }
        }
        _ => SmoothSymbol {
            kind: Kind::Localized { inner: Arc::new(f.clone()), m },
            max_order: f.max_order,
            window,
            poly: None,
            label,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_parsed_symbols() {
        let f = SmoothSymbol::parse("sin(x)").unwrap();
        assert!((f.derivative(2, 0.4).unwrap().re + 0.4f64.sin()).abs() < 1e-15);
        assert!(matches!(f.derivative(9, 0.0), Err(Error::OrderExceeded { .. })));
        let g = SmoothSymbol::parse_with("tanh(2*x) + gauss(x)*x^3", 12, Window::symmetric(3.0)).unwrap();
        assert_eq!(g.max_order(), 12);
    }

    #[test]
    fn numeric_symbol_matches_closed_form() {
        let n = SmoothSymbol::numeric(|x| C64::new(x.sin(), 0.0), 4, 1.0, Window::default(), "sin").unwrap();
        for k in 0..=4 {
            let exact = match k % 4 {
                0 => 0.3f64.sin(),
                1 => 0.3f64.cos(),
                2 => -0.3f64.sin(),
                _ => -0.3f64.cos(),
            };
            let got = n.derivative(k, 0.3).unwrap().re;
            assert!((got - exact).abs() < 1e-6 * 10f64.powi(k as i32 / 2), "k={k}: {got} vs {exact}");
        }
        assert!(SmoothSymbol::numeric(|_| C64::new(0.0, 0.0), 5, 1.0, Window::default(), "").is_err());
    }

    #[test]
    fn localization() {
        let f = SmoothSymbol::parse("x^2").unwrap();
        assert_eq!(localize(&f, BumpLocalizer::Infinite).eval(7.0), f.eval(7.0));
        let l = localize(&f, BumpLocalizer::new(2.0));
        assert_eq!(l.eval(1.5), f.eval(1.5));
        assert_eq!(l.eval(-2.0), f.eval(-2.0));
        assert_eq!(l.eval(4.0).norm(), 0.0);
        assert_eq!(l.eval(-5.0).norm(), 0.0);
        let v = l.eval(3.0).re;
        assert!(v > 0.0 && v < 9.0);
        // Leibniz through the cutoff matches the closed-form route
        let n = SmoothSymbol::numeric(|x| C64::new(x * x, 0.0), 2, 1.0, Window::default(), "sq").unwrap();
        let ln = localize(&n, BumpLocalizer::new(2.0));
        assert!((ln.derivative(1, 3.0).unwrap() - l.derivative(1, 3.0).unwrap()).norm() < 1e-6);
    }

    #[test]
    fn scaled_polynomial_stays_polynomial() {
        let f = SmoothSymbol::parse("x^3 - x").unwrap().scaled(C64::new(2.0, 0.0));
        assert_eq!(f.polynomial().unwrap().len(), 4);
        assert_eq!(f.eval(2.0).re, 12.0);
    }
}
