//! Complex grid functions, weighted inner products and moments.

use num_complex::Complex64;

use super::grid::{Sector, VelocityGrid};
use crate::error::{Error, Result};

/// Which power of `⟨v⟩` has been absorbed into the stored values.
///
/// `Phi` is the natural representation; `Psi` stores `⟨v⟩^{-β/2}·φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    Phi,
    Psi,
}

/// A complex velocity profile sampled on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub sector: Sector,
    pub gauge: Gauge,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn from_fn(grid: &VelocityGrid, gauge: Gauge, f: impl FnMut(usize) -> Complex64) -> Self {
        Self { sector: grid.sector, gauge, values: (0..grid.len()).map(f).collect() }
    }

    pub fn from_real(grid: &VelocityGrid, values: &[f64]) -> Self {
        Self::from_fn(grid, Gauge::Phi, |n| Complex64::new(values[n], 0.0))
    }

    pub fn zeros(grid: &VelocityGrid, gauge: Gauge) -> Self {
        Self::from_fn(grid, gauge, |_| Complex64::new(0.0, 0.0))
    }

    fn check(&self, grid: &VelocityGrid) -> Result<()> {
        if self.sector != grid.sector || self.values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn check_pair(&self, other: &Self) -> Result<()> {
        if self.sector != other.sector || self.gauge != other.gauge || self.values.len() != other.values.len() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: Complex64, other: &Self) -> Result<Self> {
        self.check_pair(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self { values: self.values.iter().map(|x| x * a).collect(), ..self.clone() }
    }

    /// Re-expresses the function in the requested gauge.
    pub fn to_gauge(&self, grid: &VelocityGrid, gauge: Gauge) -> Result<Self> {
        self.check(grid)?;
        if gauge == self.gauge {
            return Ok(self.clone());
        }
        let k = match gauge {
            Gauge::Psi => -0.5 * grid.spec.beta,
            Gauge::Phi => 0.5 * grid.spec.beta,
        };
        let values = self.values.iter().zip(&grid.brackets).map(|(x, b)| x * b.powf(k)).collect();
        Ok(Self { sector: self.sector, gauge, values })
    }
}

/// `Σ W f ḡ ⟨v⟩^k`, the quadrature of `∫ f ḡ ⟨v⟩^k M dv` over the sector.
pub fn inner_product(grid: &VelocityGrid, f: &GridFunction, g: &GridFunction, k: f64) -> Result<Complex64> {
    f.check(grid)?;
    f.check_pair(g)?;
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(grid.weights.iter().zip(&grid.brackets))
        .map(|((x, y), (w, b))| x * y.conj() * (w * b.powf(k)))
        .sum())
}

/// Squared `⟨·,·⟩_k` norm.
pub fn norm_sq(grid: &VelocityGrid, f: &GridFunction, k: f64) -> Result<f64> {
    Ok(inner_product(grid, f, f, k)?.re)
}

/// Macroscopic moments of a perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub rho: Complex64,
    pub m_parallel: Complex64,
    pub m_transverse: [Complex64; 2],
    pub theta: Complex64,
}

/// Moments of a perturbation given by its longitudinal part and the two
/// transverse parts (`cos ϕ` and `sin ϕ` copies of the transverse sector).
pub fn extract_moments(
    long_grid: &VelocityGrid,
    long: &GridFunction,
    trans_grid: &VelocityGrid,
    trans: [&GridFunction; 2],
) -> Result<Moments> {
    if long_grid.sector != Sector::Longitudinal || trans_grid.sector != Sector::Transverse {
        return Err(Error::GridMismatch);
    }
    let beta = long_grid.spec.beta;
    let f = long.to_gauge(long_grid, Gauge::Phi)?;
    let wl = long_grid.weighted(-beta);
    let mut rho = Complex64::new(0.0, 0.0);
    let mut m_parallel = rho;
    let mut theta = rho;
    for n in 0..long_grid.len() {
        let x = f.values[n] * wl[n];
        rho += x;
        m_parallel += x * long_grid.v_par[n];
        theta += x * (long_grid.speed_sq[n] - 3.0) / 3.0;
    }
    let wt = trans_grid.weighted(-beta);
    let mut m_transverse = [Complex64::new(0.0, 0.0); 2];
    for (c, g) in m_transverse.iter_mut().zip(trans) {
        let g = g.to_gauge(trans_grid, Gauge::Phi)?;
        *c = g.values.iter().zip(&wt).zip(&trans_grid.v_perp).map(|((x, w), p)| x * (w * p)).sum();
    }
    Ok(Moments { rho, m_parallel, m_transverse, theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity_space::{EquilibriumSpec, RadialMap};

    fn grids(spec: &EquilibriumSpec) -> (VelocityGrid, VelocityGrid) {
        let map = if spec.is_gaussian() {
            RadialMap::Algebraic { scale: 1.0 }
        } else {
            RadialMap::Logarithmic { scale: 1.0, span: 18.4 }
        };
        (
            VelocityGrid::build(spec, 64, 32, Sector::Longitudinal, map).unwrap(),
            VelocityGrid::build(spec, 64, 32, Sector::Transverse, map).unwrap(),
        )
    }

    #[test]
    fn moments_of_basic_profiles() {
        for spec in [EquilibriumSpec::gaussian(0.0).unwrap(), EquilibriumSpec::polynomial(5.5, 2.0).unwrap()] {
            let (gl, gt) = grids(&spec);
            let z = GridFunction::zeros(&gt, Gauge::Phi);
            let one = GridFunction::from_real(&gl, &vec![1.0; gl.len()]);
            let m = extract_moments(&gl, &one, &gt, [&z, &z]).unwrap();
            assert!((m.rho - 1.0).norm() < 1e-8, "{} {:?}", m.rho, spec.kind);
            assert!(m.m_parallel.norm() < 1e-14 && m.theta.norm() < 1e-7);
            let v1 = GridFunction::from_real(&gl, &gl.v_par);
            let m = extract_moments(&gl, &v1, &gt, [&z, &z]).unwrap();
            assert!((m.m_parallel - 1.0).norm() < 1e-8 && m.rho.norm() < 1e-14);
            let v2 = GridFunction::from_real(&gt, &gt.v_perp);
            let m = extract_moments(&gl, &GridFunction::zeros(&gl, Gauge::Phi), &gt, [&v2, &z]).unwrap();
            assert!((m.m_transverse[0] - 1.0).norm() < 1e-8 && m.m_transverse[1].norm() == 0.0);
        }
    }

    #[test]
    fn gaussian_energy_profile_has_unit_temperature() {
        let spec = EquilibriumSpec::gaussian(0.0).unwrap();
        let (gl, gt) = grids(&spec);
        let e2: Vec<f64> = gl.speed_sq.iter().map(|s| 0.5 * (s - 3.0)).collect();
        let z = GridFunction::zeros(&gt, Gauge::Phi);
        let m = extract_moments(&gl, &GridFunction::from_real(&gl, &e2), &gt, [&z, &z]).unwrap();
        assert!((m.theta - 1.0).norm() < 1e-9, "{}", m.theta);
        // ⟨v₁², (|v|²-3)/3⟩ = 2/3
        let a: f64 = gl.integrate(0.0, |n| gl.v_par[n].powi(2) * (gl.speed_sq[n] - 3.0) / 3.0);
        assert!((a - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn mismatched_sectors_are_rejected() {
        let spec = EquilibriumSpec::gaussian(0.0).unwrap();
        let (gl, gt) = grids(&spec);
        let f = GridFunction::from_real(&gl, &gl.v_par);
        let g = GridFunction::from_real(&gt, &gt.v_perp);
        assert_eq!(inner_product(&gl, &f, &g, 0.0), Err(Error::GridMismatch));
        assert_eq!(f.axpy(Complex64::new(1.0, 0.0), &g), Err(Error::GridMismatch));
    }

    #[test]
    fn gauge_change_preserves_weighted_norm() {
        let spec = EquilibriumSpec::polynomial(5.5, 2.0).unwrap();
        let (gl, _) = grids(&spec);
        let f = GridFunction::from_fn(&gl, Gauge::Phi, |n| Complex64::new(1.0 + gl.v_par[n], gl.speed_sq[n].sqrt()));
        let psi = f.to_gauge(&gl, Gauge::Psi).unwrap();
        let a = norm_sq(&gl, &f, -2.0).unwrap();
        let b = norm_sq(&gl, &psi, 0.0).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }
}
