//! Symmetry analysis of current-value Hamiltonian optimal-control models.
//!
//! The crate derives partial-Hamiltonian operators from a model's
//! determining equation, builds and checks the associated first integrals,
//! and uses them to reduce the canonical system to closed form or quadrature.

pub mod catalog;
pub mod detsolve;
pub mod dsl;
pub mod dynsys;
pub mod integrals;
pub mod numerics;
pub mod pipeline;
pub mod poly;
pub mod reduce;
pub mod scalar;
pub mod symcore;

#[cfg(test)]
mod testutil;

/// Exact arbitrary-precision rational.
pub type Rational = num_rational::BigRational;

pub use numerics::{Trajectory, Trajectory64};
pub use poly::{ExactPoly, Poly64};
pub use scalar::Real;
pub use symcore::{Expr, Symbol};
