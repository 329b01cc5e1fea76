//! Nonlinear Bell-type functionals for networks of Gaussian sources.

// `!(x > 0.0)` is how parameter checks reject NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bell;
pub mod error;
pub mod fock_oracle;
pub mod gaussian;
pub mod network;
pub mod optimize;
pub mod quadrature;
pub mod quasiprob;
pub mod theorems;
pub mod validation;

pub use error::{Error, Result};
/// Phase-space points are complex amplitudes.
pub use num_complex::Complex64;
