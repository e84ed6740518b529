//! Unnormalized discrete Fourier transforms.
//!
//! `forward` computes `X_k = Σ_j x_j e^{-2πi jk/n}`; `inverse` uses the opposite sign and
//! no `1/n` factor. Power-of-two lengths use an iterative radix-2 transform, other lengths
//! fall back to the direct sum.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

pub fn forward(x: &mut [C64]) {
    transform(x, Direction::Forward)
}

pub fn inverse(x: &mut [C64]) {
    transform(x, Direction::Inverse)
}

pub fn transform(x: &mut [C64], dir: Direction) {
    let n = x.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(x, dir.sign());
    } else {
        direct(x, dir.sign());
    }
}

fn direct(x: &mut [C64], sign: f64) {
    let n = x.len();
    let src: Vec<C64> = x.to_vec();
    for (k, out) in x.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (j, &v) in src.iter().enumerate() {
            let ang = sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
            acc += v * C64::new(ang.cos(), ang.sin());
        }
        *out = acc;
    }
}

fn radix2(x: &mut [C64], sign: f64) {
    let n = x.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            x.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let twiddles: Vec<C64> = (0..half)
            .map(|k| {
                let ang = sign * 2.0 * PI * k as f64 / len as f64;
                C64::new(ang.cos(), ang.sin())
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = x[start + k];
                let b = x[start + k + half] * twiddles[k];
                x[start + k] = a + b;
                x[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Row-major 2D transform of an `n0 × n1` array.
pub fn transform_2d(x: &mut [C64], n0: usize, n1: usize, dir: Direction) {
    assert_eq!(x.len(), n0 * n1);
    for row in x.chunks_mut(n1) {
        transform(row, dir);
    }
    let mut col = Vec::with_capacity(n0);
    for j in 0..n1 {
        col.clear();
        col.extend((0..n0).map(|i| x[i * n1 + j]));
        transform(&mut col, dir);
        for (i, &v) in col.iter().enumerate() {
            x[i * n1 + j] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive(x: &[C64], sign: f64) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let a = sign * 2.0 * PI * (j * k) as f64 / n as f64;
                        v * C64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        for n in [1usize, 2, 4, 8, 16, 64, 3, 6, 12] {
            let x: Vec<C64> =
                (0..n).map(|j| C64::new((j as f64 * 0.7).sin(), (j as f64 * 1.3).cos())).collect();
            let mut y = x.clone();
            forward(&mut y);
            let z = naive(&x, -1.0);
            for (a, b) in y.iter().zip(&z) {
                assert!((a - b).norm() < 1e-11, "n={n}");
            }
            inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert!((a / n as f64 - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn delta_transforms_to_constant() {
        let mut x = vec![C64::new(0.0, 0.0); 16];
        x[0] = C64::new(1.0, 0.0);
        transform_2d(&mut x, 4, 4, Direction::Forward);
        assert!(x.iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
    }
}
