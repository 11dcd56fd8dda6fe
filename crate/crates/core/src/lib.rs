//! Numerical laboratory for null controllability of degenerate parabolic
//! equations: coefficients, Carleman weights, a flux-form solver with an
//! exact discrete adjoint, weighted functionals, inequality verifiers and a
//! penalized HUM control solver.

// `!(x > 0.0)` is used on purpose throughout: NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod coefficients;
pub mod control;
pub mod error;
pub mod functionals;
pub mod pde_solver;
pub mod quadrature;
pub mod sampling;
pub mod weights;

pub use error::{LabError, Result};
