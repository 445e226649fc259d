//! Fluid eigenvalue branches and macroscopic limits for a linear kinetic
//! equation with a heavy-tailed equilibrium and a weighted BGK collision
//! operator.
//!
//! The velocity space is reduced to two axisymmetric sectors around the wave
//! direction. Eigenvalues are computed both from the reduced dispersion
//! relations and from the discretized operator, tracked as branches in the
//! perturbation parameter `η`, fitted against the predicted power laws, and
//! finally used to evolve single Fourier modes of the rescaled equation.

// `!(x > tol)` is deliberate: it also rejects NaN. Index loops mirror the
// matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod collision;
pub mod config;
pub mod error;
pub mod macro_evolution;
pub mod quadrature;
pub mod spectral;
pub mod suite;
pub mod velocity_space;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use velocity_space::{
    EquilibriumKind, EquilibriumSpec, Gauge, GridFunction, Moments, RadialMap, Sector, VelocityGrid,
};
