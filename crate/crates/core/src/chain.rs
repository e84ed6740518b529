//! Operator chain rule `∂^β F(u) = Σ c(ℓ, α_1..α_ℓ) T^{u,…,u}_{F^[ℓ]}(∂^{α_1}u, …, ∂^{α_ℓ}u)`.
//!
//! The coefficients are produced by running the induction on `|β|` mechanically. One more
//! derivative `δ` acting on `T^{u,…,u}_{F^[ℓ]}(X_1..X_ℓ)` gives
//!
//! * `ℓ + 1` order-raising terms from the perturbation formula, with `δu` inserted at every
//!   anchor slot, and
//! * `ℓ` same-order terms from Leibniz, one for each argument `X_i ↦ δX_i`.
//!
//! Argument tuples are ordered and only identical tuples merge. Derivatives are applied axis
//! by axis in increasing order, so `∂^α = ∂_{d−1}^{α_{d−1}} ⋯ ∂_0^{α_0}` with axis 0 innermost.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::linalg::{func_calc, HermitianOperator, Matrix, TraceMode};
use crate::moi::{moi_schur_spectral, DEFAULT_WORK_CAP};
use crate::symbol::SmoothSymbol;
use crate::torus::{Backend, TorusElement};
use crate::{Error, Residual, Result};

pub type MultiIndex = Vec<u32>;

/// `coeff · T_{F^[ℓ]}(∂^{α_1}u, …, ∂^{α_ℓ}u)` with `ℓ = args.len()`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExpansionTerm {
    pub args: Vec<MultiIndex>,
    pub coeff: u64,
}

impl ExpansionTerm {
    pub fn order(&self) -> usize {
        self.args.len()
    }
}

fn unit(d: usize, axis: usize) -> MultiIndex {
    let mut e = alloc::vec![0; d];
    e[axis] = 1;
    e
}

/// Expansion of `∂^β F(u)`; deterministic, sorted by `(ℓ, args)`.
pub fn expand(beta: &[u32]) -> Result<Vec<ExpansionTerm>> {
    let d = beta.len();
    let k: u32 = beta.iter().sum();
    if k == 0 {
        return Err(Error::DegenerateInput("the chain rule needs |β| ≥ 1"));
    }
    let steps: Vec<usize> = (0..d).flat_map(|i| core::iter::repeat_n(i, beta[i] as usize)).collect();
    let mut terms: BTreeMap<Vec<MultiIndex>, u64> = BTreeMap::new();
    terms.insert(alloc::vec![unit(d, steps[0])], 1);
    for &axis in &steps[1..] {
        let e = unit(d, axis);
        let mut next: BTreeMap<Vec<MultiIndex>, u64> = BTreeMap::new();
        for (args, c) in &terms {
            for slot in 0..=args.len() {
                let mut a = args.clone();
                a.insert(slot, e.clone());
                *next.entry(a).or_insert(0) += c;
            }
            for i in 0..args.len() {
                let mut a = args.clone();
                a[i][axis] += 1;
                *next.entry(a).or_insert(0) += c;
            }
        }
        terms = next;
    }
    let mut out: Vec<ExpansionTerm> = terms.into_iter().map(|(args, coeff)| ExpansionTerm { args, coeff }).collect();
    out.sort_by(|a, b| (a.order(), &a.args).cmp(&(b.order(), &b.args)));
    Ok(out)
}

/// Tab-separated table `order  tuple  coefficient`.
pub fn format_expansion(terms: &[ExpansionTerm]) -> String {
    let mut s = String::from("order\ttuple\tcoefficient\n");
    for t in terms {
        let tuple: Vec<String> = t
            .args
            .iter()
            .map(|a| a.iter().map(|v| alloc::format!("{v}")).collect::<Vec<_>>().join(","))
            .collect();
        let _ = writeln!(s, "{}\t({})\t{}", t.order(), tuple.join(";"), t.coeff);
    }
    s
}

/// How many set partitions of `{1..K}` have the given multiset of block sizes.
pub fn set_partition_count(sizes: &[u32]) -> u128 {
    let k: u32 = sizes.iter().sum();
    let fact = |n: u32| (1..=n as u128).product::<u128>();
    let mut denom: u128 = sizes.iter().map(|&s| fact(s)).product();
    let mut mult: BTreeMap<u32, u32> = BTreeMap::new();
    for &s in sizes {
        *mult.entry(s).or_insert(0) += 1;
    }
    for &m in mult.values() {
        denom *= fact(m);
    }
    fact(k) / denom
}

/// Collapses a one-dimensional expansion to `{sorted block sizes → Σ coeff}`.
pub fn commutative_weights(terms: &[ExpansionTerm]) -> BTreeMap<Vec<u32>, u128> {
    let mut out = BTreeMap::new();
    for t in terms {
        let mut sizes: Vec<u32> = t.args.iter().map(|a| a.iter().sum()).collect();
        sizes.sort_unstable();
        *out.entry(sizes).or_insert(0) += t.coeff as u128;
    }
    out
}

/// Checks `Σ coeff = ℓ!·#(set partitions of that type)` for every block-size type of `∂^K`.
pub fn commutative_weight_identity(k: u32) -> Result<bool> {
    let weights = commutative_weights(&expand(&[k])?);
    let mut ok = true;
    for (sizes, w) in &weights {
        let l = sizes.len() as u128;
        let lf: u128 = (1..=l).product();
        ok &= *w == lf * set_partition_count(sizes);
    }
    // every integer partition of K must appear
    ok &= weights.len() == integer_partitions(k);
    Ok(ok)
}

fn integer_partitions(k: u32) -> usize {
    fn count(n: u32, max: u32) -> usize {
        if n == 0 {
            return 1;
        }
        (1..=max.min(n)).map(|p| count(n - p, p)).sum()
    }
    count(k, k)
}

/// The derivations `∂_j`.
#[derive(Debug, Clone)]
pub enum DerivationSpec {
    /// `∂_j X = [D_j, X]`.
    Inner(Vec<HermitianOperator>),
    /// Fourier derivations of the torus carrying the operand.
    Torus,
}

/// The operand `u`.
#[derive(Debug, Clone)]
pub enum ChainOperand {
    Operator(HermitianOperator),
    Torus(TorusElement),
}

/// Fraction of `‖F(u)‖₂` tolerated in the modes `|k|_∞ > 3N/8` before derivatives are trusted.
pub const SPECTRAL_MASS_GUARD: f64 = 1e-12;

fn anchor(u: &ChainOperand, der: &DerivationSpec, d: usize) -> Result<HermitianOperator> {
    match (u, der) {
        (ChainOperand::Operator(h), DerivationSpec::Inner(ds)) => {
            if ds.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: ds.len() });
            }
            for dj in ds {
                if dj.dim() != h.dim() {
                    return Err(Error::DimensionMismatch { expected: h.dim(), found: dj.dim() });
                }
            }
            Ok(h.clone())
        }
        (ChainOperand::Torus(x), DerivationSpec::Torus) => {
            let a = x.algebra();
            if a.backend() != Backend::Matrix || a.oversample() != 1 {
                return Err(Error::BackendMismatch("torus chain rule runs on the base matrix model"));
            }
            if a.d() != d {
                return Err(Error::DimensionMismatch { expected: a.d(), found: d });
            }
            HermitianOperator::new(x.to_matrix()?, TraceMode::Normalized)
        }
        _ => Err(Error::BackendMismatch("operand and derivation kinds differ")),
    }
}

/// `∂^α u` as a matrix.
fn derivative_of(u: &ChainOperand, der: &DerivationSpec, alpha: &[u32]) -> Result<Matrix> {
    match (u, der) {
        (ChainOperand::Operator(h), DerivationSpec::Inner(ds)) => Ok(inner_derivative(h.matrix(), ds, alpha)),
        (ChainOperand::Torus(x), DerivationSpec::Torus) => {
            let a: Vec<usize> = alpha.iter().map(|&v| v as usize).collect();
            x.derive_multi(&a).to_matrix()
        }
        _ => Err(Error::BackendMismatch("operand and derivation kinds differ")),
    }
}

fn inner_derivative(x: &Matrix, ds: &[HermitianOperator], alpha: &[u32]) -> Matrix {
    let mut m = x.clone();
    for (j, &a) in alpha.iter().enumerate() {
        for _ in 0..a {
            m = ds[j].matrix().commutator(&m);
        }
    }
    m
}

fn normalized_l2(m: &Matrix) -> f64 {
    m.frobenius_norm() / (m.dim() as f64).sqrt()
}

/// `Σ coeff·T^{u,…,u}_{F^[ℓ]}(∂^{α_1}u, …)` and `Σ coeff·‖term‖₂`.
fn evaluate_with_scale(
    f: &SmoothSymbol,
    u: &ChainOperand,
    terms: &[ExpansionTerm],
    der: &DerivationSpec,
) -> Result<(Matrix, f64)> {
    let d = terms.first().map(|t| t.args[0].len()).unwrap_or(0);
    let h = anchor(u, der, d)?;
    let max_order = terms.iter().map(|t| t.order()).max().unwrap_or(0);
    if max_order > f.max_order() {
        return Err(Error::OrderExceeded { requested: max_order, max: f.max_order() });
    }
    let spec = h.eig();
    let mut cache: BTreeMap<MultiIndex, Matrix> = BTreeMap::new();
    let mut total = Matrix::zeros(h.dim());
    let mut scale = 0.0;
    for t in terms {
        let mut args = Vec::with_capacity(t.order());
        for a in &t.args {
            if !cache.contains_key(a) {
                cache.insert(a.clone(), derivative_of(u, der, a)?);
            }
            args.push(cache[a].clone());
        }
        let spectra = alloc::vec![&spec; t.order() + 1];
        let term = moi_schur_spectral(f, &spectra, &args, DEFAULT_WORK_CAP)?.scale_real(t.coeff as f64);
        scale += normalized_l2(&term);
        total += &term;
    }
    Ok((total, scale))
}

pub fn evaluate_expansion(f: &SmoothSymbol, u: &ChainOperand, terms: &[ExpansionTerm], der: &DerivationSpec) -> Result<Matrix> {
    Ok(evaluate_with_scale(f, u, terms, der)?.0)
}

/// `∂^β F(u)` computed directly: iterated commutators of `F(u)`, or Fourier derivatives of
/// `F(u)` after the spectral-mass guard.
pub fn direct_derivative(f: &SmoothSymbol, u: &ChainOperand, beta: &[u32], der: &DerivationSpec) -> Result<Matrix> {
    let h = anchor(u, der, beta.len())?;
    let fu = func_calc(&h, f)?;
    match (u, der) {
        (ChainOperand::Operator(_), DerivationSpec::Inner(ds)) => Ok(inner_derivative(fu.matrix(), ds, beta)),
        (ChainOperand::Torus(x), DerivationSpec::Torus) => {
            let alg = x.algebra();
            let fx = TorusElement::from_matrix(alg, fu.matrix())?;
            let n = alg.n() as i64;
            let mut outer = 0.0;
            let mut worst = [0i64; 2];
            let mut worst_mass = -1.0;
            for (i, c) in fx.coeffs().iter().enumerate() {
                let k = alg.mode(i);
                if 8 * k[0].abs().max(k[1].abs()) > 3 * n {
                    outer += c.norm_sqr();
                    if c.norm_sqr() > worst_mass {
                        worst_mass = c.norm_sqr();
                        worst = k;
                    }
                }
            }
            if outer.sqrt() > SPECTRAL_MASS_GUARD * fx.l2() {
                return Err(Error::BandOverflow { mode: alloc::format!("{worst:?}") });
            }
            let a: Vec<usize> = beta.iter().map(|&v| v as usize).collect();
            fx.derive_multi(&a).to_matrix()
        }
        _ => Err(Error::BackendMismatch("operand and derivation kinds differ")),
    }
}

/// `‖∂^β F(u) − Σ_terms‖₂` against `max(‖∂^β F(u)‖₂, Σ coeff·‖term‖₂)`.
pub fn chain_rule_residual(f: &SmoothSymbol, u: &ChainOperand, beta: &[u32], der: &DerivationSpec) -> Result<Residual> {
    let terms = expand(beta)?;
    let lhs = direct_derivative(f, u, beta, der)?;
    let (rhs, scale) = evaluate_with_scale(f, u, &terms, der)?;
    Ok(Residual::new(normalized_l2(&(&lhs - &rhs)), scale.max(normalized_l2(&lhs))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::random_hermitian;
    use crate::torus::{random_band_element, TorusAlgebra};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn as_map(terms: &[ExpansionTerm]) -> BTreeMap<(usize, Vec<MultiIndex>), u64> {
        terms.iter().map(|t| ((t.order(), t.args.clone()), t.coeff)).collect()
    }

    #[test]
    fn small_expansions() {
        let t1 = expand(&[1]).unwrap();
        assert_eq!(t1, alloc::vec![ExpansionTerm { args: alloc::vec![alloc::vec![1]], coeff: 1 }]);
        let t2 = as_map(&expand(&[2]).unwrap());
        let want2: BTreeMap<_, _> =
            [((1, alloc::vec![alloc::vec![2]]), 1), ((2, alloc::vec![alloc::vec![1], alloc::vec![1]]), 2)].into_iter().collect();
        assert_eq!(t2, want2);
        let t3 = as_map(&expand(&[3]).unwrap());
        let v = |x: &[u32]| -> Vec<MultiIndex> { x.iter().map(|&a| alloc::vec![a]).collect() };
        let want3: BTreeMap<_, _> = [
            ((1, v(&[3])), 1),
            ((2, v(&[1, 2])), 3),
            ((2, v(&[2, 1])), 3),
            ((3, v(&[1, 1, 1])), 6),
        ]
        .into_iter()
        .collect();
        assert_eq!(t3, want3);
        assert!(expand(&[0, 0]).is_err());
        let table = format_expansion(&expand(&[2]).unwrap());
        assert!(table.contains("2\t(1;1)\t2"));
    }

    #[test]
    fn commutative_weights_match_faa_di_bruno() {
        for k in 1..=6 {
            assert!(commutative_weight_identity(k).unwrap(), "K={k}");
        }
        // Bell numbers as a second oracle: Σ_types count = B_K
        let bell = [1u128, 1, 2, 5, 15, 52, 203];
        for k in 1..=6u32 {
            let w = commutative_weights(&expand(&[k]).unwrap());
            let total: u128 = w.keys().map(|s| set_partition_count(s)).sum();
            assert_eq!(total, bell[k as usize]);
        }
    }

    #[test]
    fn order_bound_and_axis_covariance() {
        for beta in [[1u32, 2], [2, 1], [0, 3], [2, 2]] {
            let k: u32 = beta.iter().sum();
            for t in &expand(&beta).unwrap() {
                assert!(t.order() as u32 <= k);
                let total: u32 = t.args.iter().flatten().sum();
                assert_eq!(total, k);
            }
        }
        // a single-axis multi-index is covariant under swapping the axes
        let relabel: BTreeMap<_, _> = expand(&[3, 0])
            .unwrap()
            .iter()
            .map(|t| (t.args.iter().map(|a| alloc::vec![a[1], a[0]]).collect::<Vec<_>>(), t.coeff))
            .collect();
        let other: BTreeMap<_, _> = expand(&[0, 3]).unwrap().into_iter().map(|t| (t.args, t.coeff)).collect();
        assert_eq!(relabel, other);
    }

    #[test]
    fn inner_derivation_identities() {
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let u = random_hermitian(&mut r, 6, 0.5);
        let ds = DerivationSpec::Inner(alloc::vec![random_hermitian(&mut r, 6, 0.5), random_hermitian(&mut r, 6, 0.5)]);
        let op = ChainOperand::Operator(u.clone());
        // F = x², |β| = 1: ∂u·u + u·∂u
        let f = SmoothSymbol::parse("x^2").unwrap();
        let got = evaluate_expansion(&f, &op, &expand(&[1, 0]).unwrap(), &ds).unwrap();
        let DerivationSpec::Inner(dv) = &ds else { unreachable!() };
        let du = dv[0].matrix().commutator(u.matrix());
        let want = &du.matmul(u.matrix()) + &u.matrix().matmul(&du);
        assert!((&got - &want).max_abs() < 1e-12);
        // anti-Hermitian at |β| = 1
        assert!((&got + &got.adjoint()).max_abs() < 1e-12);
        // constant F
        let c = SmoothSymbol::parse("3").unwrap();
        assert!(evaluate_expansion(&c, &op, &expand(&[1, 1]).unwrap(), &ds).unwrap().max_abs() < 1e-14);
        for src in ["x^2", "x^3 - 2*x", "0.5*x^5 - x^4 + x^2 - 1"] {
            let f = SmoothSymbol::parse(src).unwrap();
            for beta in [[1u32, 0], [0, 2], [1, 1], [2, 1], [0, 3]] {
                let res = chain_rule_residual(&f, &op, &beta, &ds).unwrap();
                assert!(res.within(1e-12), "{src} {beta:?}: {res:?}");
            }
        }
        let zero = ChainOperand::Operator(HermitianOperator::zeros(6, TraceMode::Normalized));
        let res = chain_rule_residual(&SmoothSymbol::parse("x^3").unwrap(), &zero, &[1, 1], &ds).unwrap();
        assert_eq!(res.value, 0.0);
        let smooth = SmoothSymbol::parse("tanh(x)").unwrap();
        let res = chain_rule_residual(&smooth, &op, &[1, 1], &ds).unwrap();
        assert!(res.within(1e-6), "{res:?}");
    }

    #[test]
    fn torus_derivation() {
        let mut r = ChaCha8Rng::seed_from_u64(12);
        let a = TorusAlgebra::matrix(16, 1).unwrap();
        let u = random_band_element(&a, &mut r, 2, 0.5, true);
        let op = ChainOperand::Torus(u);
        let f = SmoothSymbol::parse("x^3 - x").unwrap();
        for beta in [[1u32, 0], [1, 1], [0, 2]] {
            let res = chain_rule_residual(&f, &op, &beta, &DerivationSpec::Torus).unwrap();
            assert!(res.within(1e-9), "{beta:?}: {res:?}");
        }
        // a non-polynomial symbol fills the lattice and trips the guard
        let wide = random_band_element(&a, &mut r, 4, 0.0, true);
        let e = SmoothSymbol::parse("exp(x)").unwrap();
        assert!(matches!(
            chain_rule_residual(&e, &ChainOperand::Torus(wide), &[1, 0], &DerivationSpec::Torus),
            Err(Error::BandOverflow { .. })
        ));
        let mixed = chain_rule_residual(&f, &op, &[1, 0], &DerivationSpec::Inner(Vec::new()));
        assert!(mixed.is_err());
    }

    #[test]
    fn diagonal_reduces_to_scalar_chain_rule() {
        // θ = 0: everything commutes and the expansion is Faà di Bruno on grid values
        let mut r = ChaCha8Rng::seed_from_u64(13);
        let a = TorusAlgebra::matrix(8, 0).unwrap();
        let u = random_band_element(&a, &mut r, 1, 0.0, true);
        let f = SmoothSymbol::parse("x^3 + 2*x^2").unwrap();
        let got = evaluate_expansion(&f, &ChainOperand::Torus(u.clone()), &expand(&[2, 0]).unwrap(), &DerivationSpec::Torus).unwrap();
        let grid = |x: &TorusElement| x.with_backend(Backend::Commutative).unwrap().grid_values().unwrap();
        let v = grid(&u);
        let v1 = grid(&u.derive(0));
        let v2 = grid(&u.derive(0).derive(0));
        let m = u.to_matrix().unwrap();
        for i in 0..64 {
            // diagonal entry i of the representation is the grid value at the same point
            let pos = v.iter().position(|z| (z - m[(i, i)]).norm() < 1e-12).unwrap();
            let x = v[pos].re;
            let f1 = 3.0 * x * x + 4.0 * x;
            let f2 = 6.0 * x + 4.0;
            let want = v2[pos] * f1 + v1[pos] * v1[pos] * f2;
            assert!((got[(i, i)] - want).norm() < 1e-10, "{i}");
        }
        assert!((0..64).all(|i| (0..64).all(|j| i == j || got[(i, j)].norm() < 1e-12)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn inner_residual_vanishes_for_polynomials(seed in 0u64..1000, deg in 1usize..=5, b0 in 0u32..=2, b1 in 0u32..=1) {
            prop_assume!(b0 + b1 >= 1);
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<f64> = (0..=deg).map(|_| crate::corpus::gaussian(&mut r)).collect();
            let f = SmoothSymbol::polynomial_from(&coeffs);
            let u = random_hermitian(&mut r, 5, 0.5);
            let ds = DerivationSpec::Inner(alloc::vec![random_hermitian(&mut r, 5, 0.5), random_hermitian(&mut r, 5, 0.5)]);
            let res = chain_rule_residual(&f, &ChainOperand::Operator(u), &[b0, b1], &ds).unwrap();
            prop_assert!(res.within(1e-12), "{:?}", res);
        }
    }
}
