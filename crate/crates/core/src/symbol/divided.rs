//! Divided differences `F^[n](λ_0, …, λ_n)`.
//!
//! Polynomials go through complete homogeneous symmetric polynomials and are exact up
//! to rounding. Other symbols use a Newton table on sorted nodes; any node run whose
//! diameter is below `1e-6·(1 + max|λ|)` is replaced by a local Taylor expansion, which
//! avoids the cancellation of the plain recursion and covers the confluent case.

use alloc::vec;
use alloc::vec::Vec;

use super::jet::Jet;
use super::SmoothSymbol;
use crate::{Error, Result, C64};

const CLUSTER_REL: f64 = 1e-6;
/// Extra Taylor terms used beyond the cluster order.
const TAYLOR_EXTRA: usize = 4;

/// `h_k(y_1, …, y_r)`: sum of all monomials of degree `k`.
pub fn complete_homogeneous(k: usize, ys: &[f64]) -> f64 {
    let mut h = vec![0.0; k + 1];
    h[0] = 1.0;
    for &y in ys {
        for j in 1..=k {
            h[j] += y * h[j - 1];
        }
    }
    h[k]
}

/// All `h_0..=h_k` at once.
fn complete_homogeneous_all(k: usize, ys: &[f64], out: &mut [f64]) {
    out[..=k].fill(0.0);
    out[0] = 1.0;
    for &y in ys {
        for j in 1..=k {
            out[j] += y * out[j - 1];
        }
    }
}

fn check_order(f: &SmoothSymbol, n: usize) -> Result<()> {
    if n > f.max_order() {
        return Err(Error::OrderExceeded { requested: n, max: f.max_order() });
    }
    Ok(())
}

/// `F^[n]` at `nodes` (`n = nodes.len() − 1`).
pub fn divided_diff(f: &SmoothSymbol, nodes: &[f64]) -> Result<C64> {
    if nodes.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    let n = nodes.len() - 1;
    check_order(f, n)?;
    if let Some(p) = f.polynomial() {
        return Ok(poly_divided(p, nodes));
    }
    let jet_len = (n + TAYLOR_EXTRA).min(f.max_order()) + 1;
    let mut pts: Vec<(f64, Jet)> = nodes.iter().map(|&x| (x, f.taylor(x, jet_len))).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let jets: Vec<&Jet> = pts.iter().map(|p| &p.1).collect();
    Ok(newton_table(&xs, &jets))
}

fn poly_divided(p: &[C64], nodes: &[f64]) -> C64 {
    let n = nodes.len() - 1;
    if p.len() <= n {
        return C64::new(0.0, 0.0);
    }
    let top = p.len() - 1 - n;
    let mut h = [0.0; super::MAX_JET * 4];
    let mut hv;
    let hs: &mut [f64] = if top < h.len() {
        &mut h[..=top]
    } else {
        hv = vec![0.0; top + 1];
        &mut hv[..]
    };
    complete_homogeneous_all(top, nodes, hs);
    let mut acc = C64::new(0.0, 0.0);
    for (m, &c) in p.iter().enumerate().skip(n) {
        acc += c * hs[m - n];
    }
    acc
}

/// Newton table on sorted nodes with Taylor replacement of tight clusters.
fn newton_table(xs: &[f64], jets: &[&Jet]) -> C64 {
    let n = xs.len() - 1;
    let scale = xs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let tol = CLUSTER_REL * (1.0 + scale);
    let mut d: [C64; super::MAX_JET] = [C64::new(0.0, 0.0); super::MAX_JET];
    let mut dv;
    let d: &mut [C64] = if n < d.len() {
        &mut d[..=n]
    } else {
        dv = vec![C64::new(0.0, 0.0); n + 1];
        &mut dv[..]
    };
    for (slot, j) in d.iter_mut().zip(jets) {
        *slot = j.value();
    }
    for len in 1..=n {
        for i in 0..=(n - len) {
            let j = i + len;
            let width = xs[j] - xs[i];
            d[i] = if width < tol {
                taylor_cluster(&xs[i..=j], jets[i])
            } else {
                (d[i + 1] - d[i]) / width
            };
        }
    }
    d[0]
}

/// `Σ_{m ≥ r} F^(m)(c)/m! · h_{m−r}(y − c)` with `c` the first node and `r + 1` nodes.
fn taylor_cluster(ys: &[f64], jet: &Jet) -> C64 {
    let r = ys.len() - 1;
    let coeffs = jet.coeffs();
    if coeffs.len() <= r {
        return C64::new(f64::NAN, f64::NAN);
    }
    let c = ys[0];
    let shifted: [f64; super::MAX_JET] = {
        let mut s = [0.0; super::MAX_JET];
        for (k, &y) in ys.iter().enumerate().take(super::MAX_JET) {
            s[k] = y - c;
        }
        s
    };
    let top = coeffs.len() - 1 - r;
    let mut h = [0.0; super::MAX_JET];
    complete_homogeneous_all(top, &shifted[..ys.len().min(super::MAX_JET)], &mut h);
    let mut acc = C64::new(0.0, 0.0);
    for m in r..coeffs.len() {
        acc += coeffs[m] * h[m - r];
    }
    acc
}

/// Dense `(n+1)`-way array in row-major order (first index slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<C64>,
}

impl Tensor {
    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }
}

/// Precomputed spectral data for evaluating `F^[n]` on products of spectra.
pub struct DividedDifferences<'a> {
    f: &'a SmoothSymbol,
    spectra: Vec<Vec<f64>>,
    jets: Vec<Vec<Jet>>,
    poly: Option<&'a [C64]>,
}

impl<'a> DividedDifferences<'a> {
    pub fn new(f: &'a SmoothSymbol, spectra: &[&[f64]]) -> Result<Self> {
        if spectra.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let n = spectra.len() - 1;
        check_order(f, n)?;
        let poly = f.polynomial();
        let jet_len = (n + TAYLOR_EXTRA).min(f.max_order()) + 1;
        let jets = if poly.is_some() {
            Vec::new()
        } else {
            spectra.iter().map(|s| s.iter().map(|&x| f.taylor(x, jet_len)).collect()).collect()
        };
        Ok(Self { f, spectra: spectra.iter().map(|s| s.to_vec()).collect(), jets, poly })
    }

    pub fn order(&self) -> usize {
        self.spectra.len() - 1
    }

    pub fn symbol(&self) -> &SmoothSymbol {
        self.f
    }

    /// `F^[n](λ^{(0)}_{i_0}, …, λ^{(n)}_{i_n})`.
    pub fn entry(&self, idx: &[usize]) -> C64 {
        let n = self.order();
        let mut xs = [0.0; super::MAX_JET];
        for (k, &i) in idx.iter().enumerate() {
            xs[k] = self.spectra[k][i];
        }
        if let Some(p) = self.poly {
            return poly_divided(p, &xs[..=n]);
        }
        let mut order: [usize; super::MAX_JET] = [0; super::MAX_JET];
        for (k, o) in order.iter_mut().enumerate().take(n + 1) {
            *o = k;
        }
        order[..=n].sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(core::cmp::Ordering::Equal));
        let sorted: Vec<f64> = order[..=n].iter().map(|&k| xs[k]).collect();
        let jets: Vec<&Jet> = order[..=n].iter().map(|&k| &self.jets[k][idx[k]]).collect();
        newton_table(&sorted, &jets)
    }

    pub fn tensor(&self) -> Tensor {
        let dims: Vec<usize> = self.spectra.iter().map(|s| s.len()).collect();
        let total: usize = dims.iter().product();
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..total {
            data.push(self.entry(&idx));
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Tensor { dims, data }
    }
}

/// Entry `(i_0..i_n)` is `F^[n](spectra[0][i_0], …, spectra[n][i_n])`.
pub fn divided_diff_tensor(f: &SmoothSymbol, spectra: &[&[f64]]) -> Result<Tensor> {
    Ok(DividedDifferences::new(f, spectra)?.tensor())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::Window;
    use proptest::prelude::*;

    fn sym(s: &str) -> SmoothSymbol {
        SmoothSymbol::parse(s).unwrap()
    }

    #[test]
    fn worked_examples() {
        let sq = sym("x^2");
        assert_eq!(divided_diff(&sq, &[1.5, -0.25]).unwrap().re, 1.25);
        let cube = sym("x^3");
        assert_eq!(divided_diff(&cube, &[1.0, 2.0, 3.0]).unwrap().re, 6.0);
        for m in 0..5 {
            let f = SmoothSymbol::parse(&alloc::format!("x^{m}")).unwrap();
            let nodes: Vec<f64> = (0..m + 2).map(|k| 0.3 * k as f64 - 0.4).collect();
            assert_eq!(divided_diff(&f, &nodes).unwrap().norm(), 0.0);
        }
        let s = sym("sin(x)");
        let v = divided_diff(&s, &[0.7, 0.7]).unwrap();
        assert!((v.re - 0.7f64.cos()).abs() < 1e-15);
        let v2 = divided_diff(&s, &[0.7, 0.7, 0.7]).unwrap();
        assert!((v2.re + 0.5 * 0.7f64.sin()).abs() < 1e-15);
        assert!(matches!(
            divided_diff(&s, &[0.0; 10]),
            Err(Error::OrderExceeded { requested: 9, max: 8 })
        ));
    }

    #[test]
    fn tensor_examples() {
        let s = sym("sin(x)");
        let t = divided_diff_tensor(&s, &[&[0.0], &[0.0]]).unwrap();
        assert_eq!(t.dims, vec![1, 1]);
        assert!((t.data[0].re - 1.0).abs() < 1e-15);
        let sq = sym("x^2");
        let t = divided_diff_tensor(&sq, &[&[1.0, 2.0], &[3.0]]).unwrap();
        assert_eq!(t.get(&[0, 0]).re, 4.0);
        assert_eq!(t.get(&[1, 0]).re, 5.0);
        let c = sym("3");
        let t = divided_diff_tensor(&c, &[&[0.1, 0.5], &[1.0, -2.0], &[0.3]]).unwrap();
        assert!(t.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn near_confluent_matches_derivative() {
        let e = sym("exp(x)");
        let a = 0.4;
        for gap in [1e-3, 1e-7, 1e-9, 1e-12, 0.0] {
            let v = divided_diff(&e, &[a, a + gap]).unwrap().re;
            let exact = a.exp() * (1.0 + gap / 2.0 + gap * gap / 6.0);
            assert!((v - exact).abs() <= 1e-9 * exact, "gap {gap}");
            let v3 = divided_diff(&e, &[a, a + gap, a + 2.0 * gap]).unwrap().re;
            assert!((v3 - 0.5 * a.exp()).abs() <= 1e-2 * a.exp().max(gap * 10.0));
        }
        // cluster at second order agrees with the exact second divided difference of exp
        let v = divided_diff(&e, &[0.0, 1e-8, 2e-8]).unwrap().re;
        assert!((v - 0.5).abs() < 1e-7);
    }

    #[test]
    fn mean_value_bound() {
        let s = sym("tanh(3*x)");
        let sup = 3.0;
        for i in 0..40 {
            for j in 0..40 {
                let a = -2.0 + 0.1 * i as f64;
                let b = -2.0 + 0.1 * j as f64 + 0.013;
                assert!(divided_diff(&s, &[a, b]).unwrap().norm() <= sup * (1.0 + 1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_in_nodes(nodes in proptest::collection::vec(-3.0f64..3.0, 2..6), seed in 0u64..1000) {
            let f = SmoothSymbol::parse_with("sin(x)*exp(x/3) + gauss(x)", 8, Window::symmetric(3.0)).unwrap();
            let base = divided_diff(&f, &nodes).unwrap();
            let mut perm = nodes.clone();
            let len = perm.len();
            let mut s = seed;
            for i in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let other = divided_diff(&f, &perm).unwrap();
            prop_assert!((base - other).norm() <= 1e-12 * (1.0 + base.norm()));
        }

        #[test]
        fn polynomial_exact(coeffs in proptest::collection::vec(-2.0f64..2.0, 1..7),
                            nodes in proptest::collection::vec(-2.0f64..2.0, 1..6)) {
            let f = SmoothSymbol::polynomial_from(&coeffs);
            let n = nodes.len() - 1;
            let got = divided_diff(&f, &nodes).unwrap();
            let expect: f64 = coeffs.iter().enumerate().skip(n)
                .map(|(m, c)| c * complete_homogeneous(m - n, &nodes)).sum();
            let scale: f64 = coeffs.iter().map(|c| c.abs()).sum::<f64>() * 3f64.powi(coeffs.len() as i32);
            prop_assert!((got.re - expect).abs() <= 1e-12 * scale);
            // the Newton recursion on distinct nodes agrees up to conditioning
            let mut sorted = nodes.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let gaps_ok = sorted.windows(2).all(|w| w[1] - w[0] > 0.2);
            if gaps_ok {
                let jets: Vec<Jet> = sorted.iter().map(|&x| f.taylor(x, 1)).collect();
                let refs: Vec<&Jet> = jets.iter().collect();
                let viatable = newton_table(&sorted, &refs);
                prop_assert!((viatable.re - expect).abs() <= 1e-9 * scale);
            }
        }
    }
}
