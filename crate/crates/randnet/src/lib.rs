//! Spectral analysis and simulation of randomly coupled linear rate networks.
//!
//! The crate studies large systems of linear differential equations
//! `du/dt = (g X - 1) u` whose coupling matrix `X` is random with independent
//! centered entries and a prescribed variance profile `S` (entry `(i, j)` has
//! variance `s_ij`).  Everything downstream of that model lives here:
//!
//! * [`profile`] — variance profiles, their Perron–Frobenius data, and the
//!   spectral-gap checks that make the asymptotic formulas valid;
//! * [`sampler`] — reproducible sampling of coupling matrices for several
//!   entry laws, plus Wigner-type Hermitian comparisons;
//! * [`kernel`] — the resolvent-product kernel `K(ζ₁, ζ₂)` and traces of
//!   analytic test functions against it, with empirical counterparts;
//! * [`mde`] — the 4×4 block Dyson fixed-point equation behind the kernel,
//!   its stability operators, and spectral-density slices;
//! * [`dynamics`] — squared-norm decay curves, long-time power laws, and
//!   stationary autocorrelation functions, both predicted and sampled;
//! * [`linalg`] — the dense helpers (matrix exponential, eigenbasis caches,
//!   smallest singular values) the other modules share.
//!
//! Determinism is a design constraint throughout: every random quantity is
//! driven by an explicit seed and stream index, and results do not depend on
//! thread counts.

// Index loops that mirror the block formulas read better than iterator
// chains here.
#![allow(clippy::needless_range_loop)]

// Link the system BLAS/LAPACK implementation.
extern crate blas_src;
extern crate openblas_src;

pub mod dynamics;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod mde;
pub mod profile;
pub mod sampler;

pub use error::{Error, Result};

/// Complex double, the scalar type used for all spectral quantities.
pub type C64 = num_complex::Complex64;
