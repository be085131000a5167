//! Numerical laboratory for stochastic fractional Volterra equations
//!
//! `X(t) = X0 + int_0^t a(t - s) A X(s) ds + int_0^t Psi(s) dW(s)`
//!
//! in finite-dimensional realizations: special functions, kernels and their
//! complete positivity, generators with their Yosida approximations,
//! resolvent families computed by interchangeable methods, and Monte Carlo
//! stochastic convolutions.

pub mod error;
pub mod grid;
pub mod kernels;
pub mod operators;
pub mod quad;
pub mod resolvent;
pub mod specfun;
pub mod stochastic;

pub use error::{Error, Result};
pub use grid::TimeGrid;
