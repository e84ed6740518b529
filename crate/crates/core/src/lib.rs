//! Operator-function calculus on finite-dimensional matrix algebras.
//!
//! The crate covers
//!
//! * dense Hermitian linear algebra with Schatten norms ([`linalg`]),
//! * scalar symbols, divided differences and symbol-space norms ([`symbol`]),
//! * multiple operator integrals and their perturbation identities ([`moi`]),
//! * a rational noncommutative torus with clock/shift and grid backends ([`torus`]),
//! * quantum Besov norms and the nonlinear-estimate harness ([`besov`]),
//! * the operator chain-rule expansion ([`chain`]),
//! * a mild-solution solver for the noncommutative Allen–Cahn equation ([`allen_cahn`]).
//!
//! File formats, configuration, baselines and the experiment runner live in the
//! `opcalc` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(a > b)` is used deliberately so NaN lands on the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("without `std` the `libm` feature supplies float math");

extern crate alloc;

pub mod allen_cahn;
pub mod besov;
pub mod chain;
pub mod corpus;
mod error;
pub mod fft;
pub mod linalg;
pub mod moi;
pub mod quadrature;
pub mod symbol;
pub mod torus;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Residual of an identity check together with the magnitude it is measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn new(value: f64, scale: f64) -> Self {
        Self { value, scale }
    }

    /// `value / scale`, with a zero scale treated as one.
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value / self.scale
        } else {
            self.value
        }
    }

    pub fn within(&self, tol: f64) -> bool {
        self.value <= tol * self.scale.max(f64::MIN_POSITIVE)
            || self.value == 0.0
    }
}
