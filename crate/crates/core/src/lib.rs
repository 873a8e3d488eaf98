//! Ritz-Uzawa neural solvers for one-dimensional elliptic problems.
//!
//! The crate is `no_std` (with `alloc`) by default. Enable the `std` feature to
//! route transcendental functions through the platform libm and to pick up
//! `std::error::Error` impls.
//!
//! Module map:
//!
//! * [`diffnet`]: sinusoidal Fourier-feature networks with exact spatial
//!   derivatives up to second order and exact hidden-parameter gradients.
//! * [`spectral`]: Sobolev-weighted cumulative power spectra, bandwidth
//!   selection and log-uniform frequency sampling.
//! * [`quadrature`]: unbiased stochastic quadrature (vanilla Monte Carlo and
//!   the stratified three-node rule) plus variance probes.
//! * [`formulations`]: strong, weak and ultra-weak correction losses and their
//!   quadratic form in the output weights.
//! * [`trainer`]: hybrid least-squares / Adam training.
//! * [`uzawa`]: the outer correction loop and error reporting.
//! * [`linlab`]: exact and inexact Uzawa iterations on matrices.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diffnet;
pub mod error;
pub mod formulations;
pub mod linlab;
pub(crate) mod math;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod trainer;
pub mod uzawa;

pub use error::{Error, Result};

/// The computational domain used throughout: the open interval (-1, 1).
pub const DOMAIN: (f64, f64) = (-1.0, 1.0);
