//! Equilibria, the axisymmetric velocity quadrature, and weighted inner
//! products and moments on it.

mod equilibrium;
mod function;
mod grid;

pub use equilibrium::{bracket, EquilibriumKind, EquilibriumSpec};
pub use function::{extract_moments, inner_product, norm_sq, Gauge, GridFunction, Moments};
pub use grid::{GridKey, RadialMap, Sector, VelocityGrid, MIN_NODES};
