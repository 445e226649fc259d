//! Axisymmetric `(r, u = cos θ)` quadrature around the wave direction `e₁`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::equilibrium::{bracket, EquilibriumSpec};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_symmetric, gauss_legendre_unit};

/// Minimum number of nodes per direction.
pub const MIN_NODES: usize = 8;

/// Azimuthal Fourier sector around `e₁`.
///
/// `Longitudinal` (m = 0) holds profiles `f(r, u)`; `Transverse` (m = 1)
/// holds profiles `g(r, u)` standing for `g(r, u)·cos ϕ`, which covers the
/// `v₂`-type modes (the `v₃` copy is identical by rotation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Longitudinal,
    Transverse,
}

impl Sector {
    pub fn index(self) -> usize {
        match self {
            Sector::Longitudinal => 0,
            Sector::Transverse => 1,
        }
    }

    /// `∫_0^{2π} |e^{imϕ}-profile|² dϕ` for the real representative.
    fn azimuthal_factor(self) -> f64 {
        match self {
            Sector::Longitudinal => 2.0 * PI,
            Sector::Transverse => PI,
        }
    }
}

/// Change of variables `s ∈ (0, 1) ↦ r ∈ (0, ∞)` for the radial rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RadialMap {
    /// `r = scale·s/(1 − s)`.
    Algebraic { scale: f64 },
    /// `r = scale·tan(πs/2)`.
    Tangent { scale: f64 },
    /// `r = scale·(e^{span·s} − 1)`, truncating at `scale·(e^{span} − 1)`;
    /// spreads nodes evenly per decade, which heavy tails need at small `η`.
    Logarithmic { scale: f64, span: f64 },
}

impl RadialMap {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialMap::Algebraic { scale } | RadialMap::Tangent { scale } => scale > 0.0,
            RadialMap::Logarithmic { scale, span } => scale > 0.0 && span > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!("radial map parameters must be positive: {self:?}")))
        }
    }

    /// Returns `(r, dr/ds)`.
    fn map(&self, s: f64) -> (f64, f64) {
        match *self {
            RadialMap::Algebraic { scale } => (scale * s / (1.0 - s), scale / ((1.0 - s) * (1.0 - s))),
            RadialMap::Tangent { scale } => {
                let t = FRAC_PI_2 * s;
                let c = t.cos();
                (scale * t.tan(), scale * FRAC_PI_2 / (c * c))
            }
            RadialMap::Logarithmic { scale, span } => {
                let e = (span * s).exp();
                (scale * (e - 1.0), scale * span * e)
            }
        }
    }
}

/// Identity of a grid, used to reject arithmetic across grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridKey {
    pub n_radial: usize,
    pub n_angular: usize,
    pub sector: Sector,
    pub map: RadialMap,
    pub alpha: f64,
    pub beta: f64,
}

/// Quadrature on one azimuthal sector. Node `(i, j)` is stored at index
/// `i·n_angular + j`; every per-node array has `n_radial·n_angular` entries.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    pub spec: EquilibriumSpec,
    pub sector: Sector,
    pub radial_map: RadialMap,
    pub radial_nodes: Vec<f64>,
    /// `ds`-weights times `dr/ds` (no `r²`, no equilibrium).
    pub radial_weights: Vec<f64>,
    pub angular_nodes: Vec<f64>,
    pub angular_weights: Vec<f64>,
    /// Full measure: azimuthal factor · `r²` · radial · angular · `M(r)`.
    pub weights: Vec<f64>,
    /// `⟨v⟩` per node.
    pub brackets: Vec<f64>,
    /// `v₁ = r u` per node.
    pub v_par: Vec<f64>,
    /// `r·sqrt(1 − u²)` per node (the transverse velocity profile).
    pub v_perp: Vec<f64>,
    /// `|v|²` per node.
    pub speed_sq: Vec<f64>,
}

impl VelocityGrid {
    pub fn build(
        spec: &EquilibriumSpec,
        n_radial: usize,
        n_angular: usize,
        sector: Sector,
        radial_map: RadialMap,
    ) -> Result<Self> {
        if n_radial < MIN_NODES || n_angular < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes per direction, got {n_radial}x{n_angular}"
            )));
        }
        radial_map.validate()?;
        let (s, ws) = gauss_legendre_unit(n_radial)?;
        let (radial_nodes, radial_weights): (Vec<f64>, Vec<f64>) = s
            .iter()
            .zip(&ws)
            .map(|(&s, &w)| {
                let (r, jac) = radial_map.map(s);
                (r, w * jac)
            })
            .unzip();
        let (angular_nodes, angular_weights) = gauss_legendre_symmetric(n_angular)?;

        let n = n_radial * n_angular;
        let mut weights = Vec::with_capacity(n);
        let mut brackets = Vec::with_capacity(n);
        let mut v_par = Vec::with_capacity(n);
        let mut v_perp = Vec::with_capacity(n);
        let mut speed_sq = Vec::with_capacity(n);
        let az = sector.azimuthal_factor();
        for (&r, &wr) in radial_nodes.iter().zip(&radial_weights) {
            let radial = az * r * r * wr * spec.density(r);
            for (&u, &wu) in angular_nodes.iter().zip(&angular_weights) {
                // Far-tail Gaussian weights underflow; the floor keeps them positive.
                weights.push((radial * wu).max(f64::MIN_POSITIVE));
                brackets.push(bracket(r));
                v_par.push(r * u);
                v_perp.push(r * (1.0 - u * u).sqrt());
                speed_sq.push(r * r);
            }
        }
        Ok(Self {
            spec: *spec,
            sector,
            radial_map,
            radial_nodes,
            radial_weights,
            angular_nodes,
            angular_weights,
            weights,
            brackets,
            v_par,
            v_perp,
            speed_sq,
        })
    }

    pub fn n_radial(&self) -> usize {
        self.radial_nodes.len()
    }

    pub fn n_angular(&self) -> usize {
        self.angular_nodes.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn key(&self) -> GridKey {
        GridKey {
            n_radial: self.n_radial(),
            n_angular: self.n_angular(),
            sector: self.sector,
            map: self.radial_map,
            alpha: self.spec.alpha,
            beta: self.spec.beta,
        }
    }

    /// `⟨v⟩^k` per node.
    pub fn bracket_pow(&self, k: f64) -> Vec<f64> {
        self.brackets.iter().map(|b| b.powf(k)).collect()
    }

    /// Weights times `⟨v⟩^k`.
    pub fn weighted(&self, k: f64) -> Vec<f64> {
        self.weights.iter().zip(&self.brackets).map(|(w, b)| w * b.powf(k)).collect()
    }

    /// Index of the node mirrored by `u ↦ −u`.
    pub fn mirror(&self, idx: usize) -> usize {
        let na = self.n_angular();
        let (i, j) = (idx / na, idx % na);
        i * na + (na - 1 - j)
    }

    /// `Σ W ⟨v⟩^k f` for a real profile.
    pub fn integrate(&self, k: f64, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().zip(&self.brackets).enumerate().map(|(n, (w, b))| w * b.powf(k) * f(n)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian() -> EquilibriumSpec {
        EquilibriumSpec::gaussian(0.0).unwrap()
    }

    #[test]
    fn gaussian_grid_reproduces_analytic_moments() {
        let g = VelocityGrid::build(&gaussian(), 64, 32, Sector::Longitudinal, RadialMap::Algebraic { scale: 1.0 })
            .unwrap();
        let m0 = g.integrate(0.0, |_| 1.0);
        let m2 = g.integrate(0.0, |n| g.v_par[n].powi(2));
        let m4 = g.integrate(0.0, |n| g.v_par[n].powi(2) * g.speed_sq[n]);
        assert!((m0 - 1.0).abs() <= 1e-10);
        assert!((m2 - 1.0).abs() <= 1e-10);
        assert!((m4 - 5.0).abs() <= 1e-9);
        assert!(g.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn transverse_sector_normalizes_transverse_momentum() {
        let g =
            VelocityGrid::build(&gaussian(), 64, 16, Sector::Transverse, RadialMap::Algebraic { scale: 1.0 }).unwrap();
        let m = g.integrate(0.0, |n| g.v_perp[n].powi(2));
        assert!((m - 1.0).abs() <= 1e-10, "{m}");
    }

    #[test]
    fn heavy_tail_algebraic_map_meets_loose_tolerance() {
        let spec = EquilibriumSpec::polynomial(5.5, 0.0).unwrap();
        let m0 = |n| {
            let g =
                VelocityGrid::build(&spec, n, 32, Sector::Longitudinal, RadialMap::Algebraic { scale: 1.0 }).unwrap();
            g.integrate(0.0, |_| 1.0)
        };
        let (a, b, c) = (m0(64), m0(128), m0(256));
        // Aitken extrapolation across the resolution sequence as the oracle.
        let denom = (c - b) - (b - a);
        let extrapolated = if denom.abs() > 1e-300 { c - (c - b) * (c - b) / denom } else { c };
        assert!((a - extrapolated).abs() <= 1e-6, "{a} {b} {c}");
        assert!((a - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn logarithmic_map_nodes_are_increasing_and_reach_far() {
        let spec = EquilibriumSpec::polynomial(5.5, 0.0).unwrap();
        let g =
            VelocityGrid::build(&spec, 64, 32, Sector::Longitudinal, RadialMap::Logarithmic { scale: 1.0, span: 18.4 })
                .unwrap();
        assert!(g.radial_nodes.windows(2).all(|p| p[0] < p[1]));
        assert!(g.angular_nodes.windows(2).all(|p| p[0] < p[1]));
        assert!(*g.radial_nodes.last().unwrap() > 1e7);
        assert!((g.integrate(0.0, |_| 1.0) - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(
            VelocityGrid::build(&gaussian(), 4, 32, Sector::Longitudinal, RadialMap::Algebraic { scale: 1.0 }),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn mirror_is_an_involution_flipping_v_par() {
        let g =
            VelocityGrid::build(&gaussian(), 8, 9, Sector::Longitudinal, RadialMap::Tangent { scale: 1.0 }).unwrap();
        for n in 0..g.len() {
            assert_eq!(g.mirror(g.mirror(n)), n);
            assert_eq!(g.v_par[g.mirror(n)], -g.v_par[n]);
        }
    }
}
