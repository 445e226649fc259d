//! Reduced dispersion relations and their roots.
//!
//! For the BGK operator an eigenfunction is `φ = g·𝒫φ` with the multiplier
//! `g = 1/(1 − μ − iη⟨v⟩^β v₁)`, so the coefficients `C` of `𝒫φ = Σ C_k E_k`
//! solve `𝒜(η, μ)C = 0` with
//! `𝒜_jk = ⟨(g − 1)E_k, Ẽ_j⟩_{-β}`. The transverse sector gives the scalar
//! relation `T(η, μ) = ⟨(g − 1)v₂, v₂⟩_{-β}/‖v₂‖²_{-β}`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::operator::SectorModel;
use super::small::{self, Mat3, ONE, ZERO};
use crate::error::{Error, Result};

const NEWTON_MAX_ITER: usize = 80;
const MULLER_MAX_ITER: usize = 200;
/// Relative step size at which an iteration is considered converged.
const STEP_TOL: f64 = 1e-14;
/// Backward error below which a root is accepted.
const ACCEPT_RESIDUAL: f64 = 1e-11;
const CENSUS_MIN_POINTS: usize = 128;
const CENSUS_MAX_POINTS: usize = 1 << 16;

/// The reduced system of one sector at fixed `η`.
#[derive(Debug, Clone, Copy)]
pub struct DispersionSystem<'a> {
    pub model: &'a SectorModel,
    pub eta: f64,
}

/// An accepted root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub mu: Complex64,
    /// `|det 𝒜| / Π‖row of |𝒜|‖`, a backward error of the reduced system.
    pub residual: f64,
    pub iterations: usize,
}

/// `𝒜` together with `d𝒜/dμ` and the entrywise absolute bound used to
/// normalize residuals.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub matrix: Mat3,
    pub derivative: Mat3,
    pub magnitude: [[f64; 3]; 3],
}

impl Evaluation {
    pub fn det(&self, k: usize) -> Complex64 {
        small::det(&self.matrix, k)
    }

    /// `d det/dμ` by Jacobi's formula.
    pub fn det_derivative(&self, k: usize) -> Complex64 {
        let adj = small::adjugate(&self.matrix, k);
        let mut s = ZERO;
        for i in 0..k {
            for j in 0..k {
                s += adj[j][i] * self.derivative[i][j];
            }
        }
        s
    }

    pub fn backward_error(&self, k: usize) -> f64 {
        let scale: f64 = (0..k).map(|j| (0..k).map(|l| self.magnitude[j][l].powi(2)).sum::<f64>().sqrt()).product();
        if scale > 0.0 {
            self.det(k).norm() / scale
        } else {
            0.0
        }
    }
}

impl<'a> DispersionSystem<'a> {
    pub fn new(model: &'a SectorModel, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::ParameterDomain(format!("eta = {eta} must be finite and non-negative")));
        }
        Ok(Self { model, eta })
    }

    pub fn rank(&self) -> usize {
        self.model.rank()
    }

    /// `g − 1` and `g` at node `n`, without cancellation for small `μ, η`.
    #[inline]
    pub fn multiplier(&self, n: usize, mu: Complex64) -> (Complex64, Complex64) {
        let t = mu + Complex64::new(0.0, self.eta * self.model.drift[n]);
        let g = ONE / (ONE - t);
        (t * g, g)
    }

    pub fn evaluate(&self, mu: Complex64) -> Evaluation {
        let k = self.rank();
        let mut matrix = small::zeros();
        let mut derivative = small::zeros();
        let mut magnitude = [[0.0; 3]; 3];
        for n in 0..self.model.len() {
            let (gm1, g) = self.multiplier(n, mu);
            let dg = g * g;
            let a = gm1.norm();
            let base = n * k * k;
            for j in 0..k {
                for l in 0..k {
                    let p = self.model.pairs[base + j * k + l];
                    matrix[j][l] += gm1 * p;
                    derivative[j][l] += dg * p;
                    magnitude[j][l] += a * p.abs();
                }
            }
        }
        Evaluation { matrix, derivative, magnitude }
    }

    /// The dispersion matrix `𝒜(η, μ)`.
    pub fn matrix(&self, mu: Complex64) -> Mat3 {
        self.evaluate(mu).matrix
    }

    /// `det 𝒜(η, μ)` (for the transverse sector, `T(η, μ)`).
    pub fn det(&self, mu: Complex64) -> Complex64 {
        self.evaluate(mu).det(self.rank())
    }

    /// Damped Newton on `det 𝒜`, with Muller's method as fallback.
    pub fn find_root(&self, seed: Complex64) -> Result<Root> {
        if self.eta == 0.0 {
            return Ok(Root { mu: ZERO, residual: 0.0, iterations: 0 });
        }
        match self.newton(seed) {
            Ok(r) => Ok(r),
            Err(_) => self.muller(seed),
        }
    }

    fn newton(&self, seed: Complex64) -> Result<Root> {
        let k = self.rank();
        let mut mu = seed;
        let mut ev = self.evaluate(mu);
        for it in 1..=NEWTON_MAX_ITER {
            let f = ev.det(k);
            let df = ev.det_derivative(k);
            if df.norm() == 0.0 || !df.is_finite() {
                break;
            }
            let step = f / df;
            let mut t = 1.0;
            let mut trial = mu - step;
            let mut tev = self.evaluate(trial);
            let mut halvings = 0;
            while tev.det(k).norm() > f.norm() && halvings < 10 && step.norm() > STEP_TOL * mu.norm() {
                t *= 0.5;
                trial = mu - step * t;
                tev = self.evaluate(trial);
                halvings += 1;
            }
            mu = trial;
            ev = tev;
            if (step * t).norm() <= STEP_TOL * mu.norm() + 1e-300 {
                let residual = ev.backward_error(k);
                if residual <= ACCEPT_RESIDUAL {
                    return Ok(Root { mu, residual, iterations: it });
                }
                break;
            }
        }
        let residual = ev.backward_error(k);
        if residual <= ACCEPT_RESIDUAL && mu.is_finite() {
            return Ok(Root { mu, residual, iterations: NEWTON_MAX_ITER });
        }
        Err(Error::RootNotConverged(format!(
            "newton from {seed} at eta = {} stalled at {mu} (residual {residual:e})",
            self.eta
        )))
    }

    fn muller(&self, seed: Complex64) -> Result<Root> {
        let k = self.rank();
        let h = Complex64::new(1e-3 * (seed.norm() + self.eta), 0.0);
        let f = |z: Complex64| self.det(z);
        let (mut x0, mut x1, mut x2) = (seed - h, seed + h, seed + Complex64::new(0.0, h.re));
        let (mut f0, mut f1, mut f2) = (f(x0), f(x1), f(x2));
        for it in 1..=MULLER_MAX_ITER {
            let h1 = x1 - x0;
            let h2 = x2 - x1;
            let d1 = (f1 - f0) / h1;
            let d2 = (f2 - f1) / h2;
            let a = (d2 - d1) / (h2 + h1);
            let b = a * h2 + d2;
            let disc = (b * b - 4.0 * f2 * a).sqrt();
            let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
            if den.norm() == 0.0 {
                break;
            }
            let dx = -2.0 * f2 / den;
            let x3 = x2 + dx;
            (x0, x1, x2) = (x1, x2, x3);
            (f0, f1, f2) = (f1, f2, f(x3));
            if dx.norm() <= STEP_TOL * x3.norm() + 1e-300 {
                let residual = self.evaluate(x3).backward_error(k);
                if residual <= ACCEPT_RESIDUAL {
                    return Ok(Root { mu: x3, residual, iterations: it });
                }
                break;
            }
        }
        Err(Error::RootNotConverged(format!("muller from {seed} at eta = {} did not converge", self.eta)))
    }

    /// Number of eigenvalues of the discretized operator in `|μ| < radius`.
    ///
    /// By the matrix determinant lemma `det(A − μ) = det Λ_μ · det(I − QᵀΛ_μ⁻¹Q)`
    /// and `det 𝒜` differs from the second factor by a nonzero constant;
    /// `Λ_μ = 1 − μ − iηd` has no zeros for `|μ| < 1`. The winding number of
    /// `det 𝒜` around the circle therefore counts eigenvalues exactly.
    pub fn count_in_disk(&self, radius: f64) -> Result<usize> {
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::ParameterDomain(format!("census radius {radius} must lie in (0, 1)")));
        }
        let mut m = CENSUS_MIN_POINTS;
        loop {
            let vals: Vec<Complex64> =
                (0..=m).map(|i| self.det(Complex64::from_polar(radius, 2.0 * PI * i as f64 / m as f64))).collect();
            if vals.iter().any(|v| v.norm() == 0.0 || !v.is_finite()) {
                return Err(Error::RootNotConverged(format!("eigenvalue on the census circle at eta = {}", self.eta)));
            }
            let incs: Vec<f64> = vals.windows(2).map(|w| (w[1] / w[0]).arg()).collect();
            if incs.iter().all(|d| d.abs() < PI / 3.0) {
                let total: f64 = incs.iter().sum();
                let winding = (total / (2.0 * PI)).round();
                if winding < 0.0 {
                    return Err(Error::RootNotConverged(format!("negative winding number at eta = {}", self.eta)));
                }
                return Ok(winding as usize);
            }
            if m >= CENSUS_MAX_POINTS {
                return Err(Error::RootNotConverged(format!("census contour unresolved at eta = {}", self.eta)));
            }
            m *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::operator::PerturbedOperator;
    use crate::spectral::test_support::{dense_model, model};
    use crate::velocity_space::{EquilibriumSpec, Sector};

    #[test]
    fn system_vanishes_at_origin() {
        let spec = EquilibriumSpec::polynomial(5.5, 0.0).unwrap();
        for sector in [Sector::Longitudinal, Sector::Transverse] {
            let m = model(&spec, sector, 24, 12);
            let d = DispersionSystem::new(&m, 0.0).unwrap();
            let a = d.matrix(ZERO);
            assert!(a.iter().flatten().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn determinant_is_conjugation_symmetric() {
        let spec = EquilibriumSpec::polynomial(8.0, 0.0).unwrap();
        let m = model(&spec, Sector::Longitudinal, 32, 16);
        let d = DispersionSystem::new(&m, 0.03).unwrap();
        let mu = Complex64::new(0.01, 0.02);
        let a = d.det(mu);
        let b = d.det(mu.conj());
        assert!((b - a.conj()).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn small_eta_limit_is_cubic_with_acoustic_roots() {
        let spec = EquilibriumSpec::gaussian(0.0).unwrap();
        let m = model(&spec, Sector::Longitudinal, 48, 24);
        let eta = 1e-7;
        let d = DispersionSystem::new(&m, eta).unwrap();
        // det 𝒜(η, η·z) / η³ → z³ + D²z with D² = 5/3.
        for z in [Complex64::new(0.3, 0.2), Complex64::new(-1.0, 0.5)] {
            let p = d.det(z * eta) / eta.powi(3);
            let expected = z * z * z + z * (5.0 / 3.0);
            assert!((p - expected).norm() < 1e-5 * expected.norm(), "{p} {expected}");
        }
    }

    #[test]
    fn roots_agree_with_dense_eigenvalues() {
        for spec in [EquilibriumSpec::gaussian(0.0).unwrap(), EquilibriumSpec::polynomial(5.5, 0.0).unwrap()] {
            let m = dense_model(&spec, Sector::Longitudinal, 16, 8);
            let eta = 1e-2;
            let d = DispersionSystem::new(&m, eta).unwrap();
            let op = PerturbedOperator::new(&m, eta).unwrap();
            let dense: Vec<Complex64> =
                op.dense().complex_eigenvalues().into_iter().map(|z| Complex64::new(z.re, z.im)).collect();
            let dd = (d.drift_d2()).sqrt();
            for seed in [ZERO, Complex64::new(0.0, dd * eta), Complex64::new(0.0, -dd * eta)] {
                let r = d.find_root(seed).unwrap();
                let best = dense.iter().map(|z| (z - r.mu).norm()).fold(f64::INFINITY, f64::min);
                assert!(best <= 1e-7 * r.mu.norm(), "{} {best}", r.mu);
            }
        }
    }

    #[test]
    fn census_matches_dense_count() {
        let spec = EquilibriumSpec::polynomial(5.5, 2.0).unwrap();
        for sector in [Sector::Longitudinal, Sector::Transverse] {
            let m = dense_model(&spec, sector, 16, 8);
            for eta in [1e-3, 1e-1, 0.8] {
                let d = DispersionSystem::new(&m, eta).unwrap();
                let op = PerturbedOperator::new(&m, eta).unwrap();
                let dense = op.dense().complex_eigenvalues().into_iter().filter(|z| z.re.hypot(z.im) < 0.5).count();
                assert_eq!(d.count_in_disk(0.5).unwrap(), dense, "eta {eta}");
            }
        }
    }

    #[test]
    fn rejects_negative_eta() {
        let spec = EquilibriumSpec::gaussian(0.0).unwrap();
        let m = model(&spec, Sector::Transverse, 8, 8);
        assert!(matches!(DispersionSystem::new(&m, -1.0), Err(Error::ParameterDomain(_))));
    }

    impl DispersionSystem<'_> {
        fn drift_d2(&self) -> f64 {
            crate::spectral::acoustic_speed_sq(self.model)
        }
    }
}
