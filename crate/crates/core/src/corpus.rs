//! Random test operands. All generators are deterministic given the RNG state.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::linalg::{HermitianOperator, Matrix, TraceMode};
use crate::C64;

/// Standard normal sample (Box–Muller).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Complex normal with `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(gaussian(rng), gaussian(rng)) * core::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. complex normal entries of variance `scale²/n` (operator norm ≈ `2·scale`).
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Matrix {
    let s = scale / (n as f64).sqrt();
    Matrix::from_fn(n, |_, _| complex_gaussian(rng) * s)
}

/// GUE-like Hermitian matrix with spectrum roughly in `[-2·scale, 2·scale]`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> HermitianOperator {
    let g = random_matrix(rng, n, scale);
    let h = (&g + &g.adjoint()).scale_real(core::f64::consts::FRAC_1_SQRT_2);
    HermitianOperator::symmetrized(h, TraceMode::Normalized)
}

/// Real diagonal operator with entries uniform in `[lo, hi)`.
pub fn random_diagonal<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> HermitianOperator {
    let d: Vec<f64> = (0..n).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect();
    HermitianOperator::from_real_diag(&d, TraceMode::Normalized)
}

/// Haar-distributed unitary: Gram–Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g = random_matrix(rng, n, 1.0);
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| g[(i, j)]).collect()).collect();
    for j in 0..n {
        // two passes of modified Gram–Schmidt keep the columns orthogonal to rounding
        for _ in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qk = &done[k];
                let proj: C64 = qk.iter().zip(rest[0].iter()).map(|(a, b)| a.conj() * b).sum();
                for (x, q) in rest[0].iter_mut().zip(qk) {
                    *x -= proj * q;
                }
            }
        }
        let nrm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[j].iter_mut() {
            *x /= nrm;
        }
    }
    Matrix::from_fn(n, |i, j| cols[j][i])
}

/// Permutation matrix sending basis vector `e_j` to `e_{perm[j]}`.
pub fn permutation_matrix(perm: &[usize]) -> Matrix {
    let n = perm.len();
    let mut m = Matrix::zeros(n);
    for (j, &i) in perm.iter().enumerate() {
        m[(i, j)] = C64::new(1.0, 0.0);
    }
    m
}

/// Uniformly random permutation (Fisher–Yates).
pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        p.swap(i, j);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 3, 10, 24] {
            assert!(random_unitary(&mut r, n).unitary_defect() < 1e-13);
        }
        let p = random_permutation(&mut r, 7);
        assert_eq!(permutation_matrix(&p).unitary_defect(), 0.0);
    }

    #[test]
    fn gaussian_moments() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..20000).map(|_| gaussian(&mut r)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05);
    }
}
