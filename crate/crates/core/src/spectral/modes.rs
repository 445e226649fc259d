//! Fluid-mode reconstruction from a root of the reduced system.

use num_complex::Complex64;

use super::dispersion::DispersionSystem;
use super::small::{self, ZERO};
use crate::error::{Error, Result};
use crate::velocity_space::{Gauge, GridFunction, Sector};

/// Relative size below which the adjugate counts as zero (rank ≤ k − 2).
const RANK_TOL: f64 = 1e-10;

/// A reconstructed fluid mode.
#[derive(Debug, Clone)]
pub struct ModeShape {
    /// Coefficients of `𝒫φ` in `(1, v₁, v₂, v₃, (|v|² − 3)/2)`, normalized to
    /// `‖𝒫φ‖_{-β} = 1`.
    pub coefficients: [Complex64; 5],
    /// `φ = g·𝒫φ` on the sector grid (φ-gauge).
    pub phi: GridFunction,
    /// `‖φ − 𝒫φ‖_{-β}`.
    pub defect: f64,
    /// `‖𝒜C‖_Γ / (‖|𝒜|‖·‖C‖_Γ)`: the eigen-residual `‖L*φ + iηv₁φ + μ⟨v⟩^{-β}φ‖`
    /// relative to the size of the reduced operator at this `(η, μ)`.
    pub residual: f64,
    /// Unnormalized eigen-residual `‖⟨v⟩^β(L*φ + iηv₁φ + μ⟨v⟩^{-β}φ)‖_{-β}`.
    pub eigen_residual: f64,
}

/// Null vector, normalization and reconstruction of the mode at a root.
pub fn eigenmode_coefficients(system: &DispersionSystem, mu: Complex64) -> Result<ModeShape> {
    let model = system.model;
    let k = model.rank();
    let ev = system.evaluate(mu);
    let a = ev.matrix;
    let c: Vec<Complex64> = if k == 1 {
        vec![Complex64::new(1.0, 0.0)]
    } else {
        let adj = small::adjugate(&a, k);
        let scale: f64 = (0..k).map(|j| (0..k).map(|l| ev.magnitude[j][l]).fold(0.0, f64::max)).fold(0.0, f64::max);
        let (col, size) = (0..k)
            .map(|j| (j, (0..k).map(|i| adj[i][j].norm_sqr()).sum::<f64>().sqrt()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap_or((0, 0.0));
        if !(size > RANK_TOL * scale * scale) {
            return Err(Error::DegenerateNullspace(format!(
                "reduced matrix at eta = {}, mu = {mu} has a null space of dimension > 1",
                system.eta
            )));
        }
        (0..k).map(|i| adj[i][col]).collect()
    };
    // Normalize ‖ΣC_kE_k‖_{-β} = 1 and fix the phase.
    let gram_norm = |c: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += (c[i].conj() * c[j]).re * model.gram[i][j];
            }
        }
        s.max(0.0).sqrt()
    };
    let lead = c[k - 1];
    let phase = if lead.norm() > 0.0 { lead.conj() / lead.norm() } else { Complex64::new(1.0, 0.0) };
    let nrm = gram_norm(&c);
    let c: Vec<Complex64> = c.iter().map(|z| z * phase / nrm).collect();

    let n = model.len();
    let mut phi = Vec::with_capacity(n);
    let mut defect_sq = 0.0;
    for i in 0..n {
        let p: Complex64 = (0..k).map(|j| c[j] * model.profiles[j][i]).sum();
        let (gm1, g) = system.multiplier(i, mu);
        phi.push(g * p);
        defect_sq += model.weight[i] * (gm1 * p).norm_sqr();
    }
    // 𝒫((g − 1)𝒫φ) has coefficients 𝒜C.
    let ac = small::matvec(&a, &c, k);
    let eigen_residual = gram_norm(&ac);
    let bound: f64 =
        (0..k).map(|j| (0..k).map(|l| ev.magnitude[j][l] * c[l].norm()).sum::<f64>().powi(2)).sum::<f64>().sqrt();
    let residual = if bound > 0.0 { eigen_residual / bound } else { 0.0 };

    let mut coefficients = [ZERO; 5];
    match model.sector() {
        Sector::Longitudinal => {
            coefficients[0] = c[0];
            coefficients[1] = c[1];
            coefficients[4] = c[2];
        }
        Sector::Transverse => coefficients[2] = c[0],
    }
    Ok(ModeShape {
        coefficients,
        phi: GridFunction { sector: model.sector(), gauge: Gauge::Phi, values: phi },
        defect: defect_sq.sqrt(),
        residual,
        eigen_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::test_support::model;
    use crate::velocity_space::{inner_product, EquilibriumSpec};

    #[test]
    fn transversal_mode_is_pure_momentum() {
        let spec = EquilibriumSpec::gaussian(0.0).unwrap();
        let m = model(&spec, Sector::Transverse, 64, 16);
        let d = DispersionSystem::new(&m, 1e-2).unwrap();
        let r = d.find_root(ZERO).unwrap();
        let shape = eigenmode_coefficients(&d, r.mu).unwrap();
        let c = shape.coefficients;
        assert_eq!(c[0], ZERO);
        assert_eq!(c[4], ZERO);
        assert_eq!(c[1], ZERO);
        assert!((c[2].re - 1.0).abs() < 1e-8 && c[2].im == 0.0, "{:?}", c[2]);
    }

    #[test]
    fn reconstructed_mode_solves_the_eigenproblem() {
        let spec = EquilibriumSpec::polynomial(5.5, 2.0).unwrap();
        let m = model(&spec, Sector::Longitudinal, 32, 16);
        let d = DispersionSystem::new(&m, 1e-2).unwrap();
        let r = d.find_root(ZERO).unwrap();
        let shape = eigenmode_coefficients(&d, r.mu).unwrap();
        assert!(shape.eigen_residual <= 1e-9, "{}", shape.eigen_residual);
        // Direct check of the φ-form: 𝒫φ − (1 − μ − iη⟨v⟩^β v₁)φ = 0.
        let p = m.op.apply_projection(&shape.phi).unwrap();
        let mut r2 = GridFunction::zeros(m.grid(), Gauge::Phi);
        for n in 0..m.len() {
            let lam = Complex64::new(1.0, -d.eta * m.drift[n]) - r.mu;
            r2.values[n] = p.values[n] - lam * shape.phi.values[n];
        }
        let res = inner_product(m.grid(), &r2, &r2, -spec.beta).unwrap().re.sqrt();
        assert!(res <= 1e-9, "{res}");
        // ‖𝒫φ‖_{-β} = 1.
        let pn = inner_product(m.grid(), &p, &p, -spec.beta).unwrap().re;
        assert!((pn - 1.0).abs() < 1e-8);
    }

    #[test]
    fn defect_matches_direct_projection() {
        let spec = EquilibriumSpec::gaussian(0.0).unwrap();
        let m = model(&spec, Sector::Longitudinal, 32, 16);
        let d = DispersionSystem::new(&m, 5e-2).unwrap();
        let r = d.find_root(Complex64::new(0.0, 0.06)).unwrap();
        let shape = eigenmode_coefficients(&d, r.mu).unwrap();
        let p = m.op.apply_projection(&shape.phi).unwrap();
        let diff = shape.phi.axpy(Complex64::new(-1.0, 0.0), &p).unwrap();
        let direct = inner_product(m.grid(), &diff, &diff, 0.0).unwrap().re.sqrt();
        assert!((direct - shape.defect).abs() <= 1e-8 * shape.defect);
    }

    #[test]
    fn degenerate_matrix_is_rejected() {
        let spec = EquilibriumSpec::gaussian(0.0).unwrap();
        let m = model(&spec, Sector::Longitudinal, 16, 8);
        // At η = 0 every μ makes 𝒜 a multiple of the identity.
        let d = DispersionSystem::new(&m, 0.0).unwrap();
        assert!(matches!(eigenmode_coefficients(&d, ZERO), Err(Error::DegenerateNullspace(_))));
    }
}
