//! Two-step time integrators for `u'' + A u = f` with time reconstructions and
//! a computable upper bound on the error in the energy norm.
//!
//! * [`operator`]: symmetric positive definite operators (diagonal sine modes,
//!   finite difference Laplacians) and the energy norm.
//! * [`scheme`]: leap-frog and the cosine family in staggered form.
//! * [`reconstruct`]: piecewise polynomial interpolants and the reconstructions
//!   `U^`, `V^`.
//! * [`residual`]: discrete residuals, residual functions and the estimator
//!   `eta_1`.
//! * [`problems`]: exact sine-series solutions, presets and error measures.
//! * [`harness`]: convergence studies, the CFL scenario and report output.

pub mod error;
pub mod harness;
pub mod operator;
pub mod problems;
pub mod reconstruct;
pub mod residual;
pub mod scheme;

pub use error::{Error, Result};
