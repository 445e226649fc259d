//! Fixtures shared by the benchmarks under `benches/`.

use kinfluid::config::RunConfig;
use kinfluid::spectral::SpectralModel;

/// Spectral model of a shipped set on its configured radial map.
pub fn model(set: &str, n_radial: usize, n_angular: usize) -> SpectralModel {
    let cfg = RunConfig::shipped(set).expect("shipped set");
    let spec = cfg.equilibrium.build().expect("valid equilibrium");
    SpectralModel::build(&spec, n_radial, n_angular, cfg.grid.radial_map).expect("valid grid")
}
