//! The perturbed operator `A_η = diag(1 − iη⟨v⟩^β v₁) − QQᵀ` in the
//! quadrature-weighted ψ-basis `x = √W·ψ`, where the columns of `Q` are
//! `√W⟨v⟩^{-β/2}e_k` for the orthonormal invariants `e_k`.
//!
//! Its eigenvalues are the `μ` of `L*φ + iηv₁φ = −μ⟨v⟩^{-β}φ`.

use faer::complex_native::c64;
use num_complex::Complex64;

use super::small::{self, Mat3, ONE, ZERO};
use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::velocity_space::{Sector, VelocityGrid};

/// Shift for the subspace iteration; all non-fluid eigenvalues satisfy
/// `Re μ ∈ [0, 1]` and `|μ| ≥ r̄`, so they are damped relative to the fluid
/// ones by `|σ|/|μ − σ|`.
const SUBSPACE_SHIFT: f64 = -0.1;
const SUBSPACE_MAX_ITER: usize = 400;
const SUBSPACE_TOL: f64 = 1e-14;
/// Magnitude below which dense-matrix entries are flushed to zero.
pub const DENSE_FLUSH: f64 = 1e-100;

/// Everything the spectral computations need about one sector, built once
/// per grid.
#[derive(Debug, Clone)]
pub struct SectorModel {
    pub op: CollisionOperator,
    /// Columns of the low-rank part, orthonormal in the plain dot product.
    pub q: Vec<Vec<f64>>,
    /// Transport multiplier `⟨v⟩^β v₁`.
    pub drift: Vec<f64>,
    /// `W⟨v⟩^{-β}`.
    pub weight: Vec<f64>,
    /// Invariant profiles: `1, v₁, (|v|² − 3)/2` or the transverse velocity.
    pub profiles: Vec<Vec<f64>>,
    /// Gram matrix of `profiles` in `⟨·,·⟩_{-β}`.
    pub gram: Vec<Vec<f64>>,
    /// Grid dual basis `Γ⁻¹E`.
    pub duals: Vec<Vec<f64>>,
    /// `√W⟨v⟩^{-β/2}`, mapping φ-values to ψ-basis coordinates.
    pub psi_scale: Vec<f64>,
    /// Per node `w·Ẽ_j·E_k`, stored as `n·k² + j·k + l`.
    pub(crate) pairs: Vec<f64>,
}

fn solve_real(gram: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let k = rhs.len();
    let mut a = small::zeros();
    for i in 0..k {
        for j in 0..k {
            a[i][j] = Complex64::new(gram[i][j], 0.0);
        }
    }
    let b: Vec<Complex64> = rhs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    small::solve(&a, &b, k).map(|x| x.into_iter().map(|z| z.re).collect())
}

impl SectorModel {
    pub fn new(op: CollisionOperator) -> Result<Self> {
        let g = &op.grid;
        let beta = g.spec.beta;
        let weight = g.weighted(-beta);
        let psi_scale: Vec<f64> =
            g.weights.iter().zip(&g.brackets).map(|(w, b)| w.sqrt() * b.powf(-0.5 * beta)).collect();
        let q = op.basis.functions.iter().map(|e| e.iter().zip(&psi_scale).map(|(e, s)| e * s).collect()).collect();
        let drift = g.brackets.iter().zip(&g.v_par).map(|(b, v)| b.powf(beta) * v).collect();
        let profiles: Vec<Vec<f64>> = match g.sector {
            Sector::Longitudinal => {
                vec![vec![1.0; g.len()], g.v_par.clone(), g.speed_sq.iter().map(|s| 0.5 * (s - 3.0)).collect()]
            }
            Sector::Transverse => vec![g.v_perp.clone()],
        };
        let k = profiles.len();
        let gram: Vec<Vec<f64>> = profiles
            .iter()
            .map(|a| profiles.iter().map(|b| a.iter().zip(b).zip(&weight).map(|((x, y), w)| x * y * w).sum()).collect())
            .collect();
        let mut duals = vec![vec![0.0; g.len()]; k];
        for n in 0..g.len() {
            let rhs: Vec<f64> = profiles.iter().map(|p| p[n]).collect();
            let d = solve_real(&gram, &rhs)
                .ok_or_else(|| Error::DegenerateNullspace("singular invariant Gram matrix".into()))?;
            for (j, v) in d.into_iter().enumerate() {
                duals[j][n] = v;
            }
        }
        let mut pairs = Vec::with_capacity(g.len() * k * k);
        for n in 0..g.len() {
            for dj in &duals {
                for ek in &profiles {
                    pairs.push(weight[n] * dj[n] * ek[n]);
                }
            }
        }
        Ok(Self { op, q, drift, weight, profiles, gram, duals, psi_scale, pairs })
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.op.grid
    }

    pub fn sector(&self) -> Sector {
        self.op.grid.sector
    }

    /// Order of the reduced system (3 or 1).
    pub fn rank(&self) -> usize {
        self.profiles.len()
    }

    pub fn len(&self) -> usize {
        self.drift.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drift.is_empty()
    }

    /// `N_jk = ∫ v₁ Ẽ_j E_k M`: the `η`-linear part of the reduced system.
    pub fn drift_matrix(&self) -> Mat3 {
        let k = self.rank();
        let mut m = small::zeros();
        for n in 0..self.len() {
            let base = n * k * k;
            for j in 0..k {
                for l in 0..k {
                    m[j][l] += Complex64::new(self.pairs[base + j * k + l] * self.drift[n], 0.0);
                }
            }
        }
        m
    }
}

/// `A_η` for one sector.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedOperator<'a> {
    pub model: &'a SectorModel,
    pub eta: f64,
}

fn dot_q(q: &[f64], x: &[Complex64]) -> Complex64 {
    q.iter().zip(x).map(|(a, b)| b * a).sum()
}

/// Bilinear (unconjugated) product.
fn bilinear(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn hermitian(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

impl<'a> PerturbedOperator<'a> {
    pub fn new(model: &'a SectorModel, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::ParameterDomain(format!("eta = {eta} must be finite and non-negative")));
        }
        Ok(Self { model, eta })
    }

    fn diagonal(&self, n: usize) -> Complex64 {
        Complex64::new(1.0, -self.eta * self.model.drift[n])
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let c: Vec<Complex64> = self.model.q.iter().map(|q| dot_q(q, x)).collect();
        (0..x.len())
            .map(|n| {
                let low: Complex64 = self.model.q.iter().zip(&c).map(|(q, c)| c * q[n]).sum();
                self.diagonal(n) * x[n] - low
            })
            .collect()
    }

    /// Dense matrix of the operator. Low-rank entries below
    /// [`DENSE_FLUSH`] are dropped: they come from floored far-tail weights and
    /// make the dense eigensolver underflow.
    pub fn dense(&self) -> faer::Mat<c64> {
        let q = &self.model.q;
        faer::Mat::from_fn(self.model.len(), self.model.len(), |i, j| {
            let low: f64 = q.iter().map(|q| q[i] * q[j]).sum();
            let low = if low.abs() < DENSE_FLUSH { 0.0 } else { low };
            let d = if i == j { self.diagonal(i) } else { ZERO };
            c64::new(d.re - low, d.im)
        })
    }

    /// `(A − σ)⁻¹ b` by the Woodbury identity.
    pub fn solve_shifted(&self, sigma: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let k = self.model.rank();
        let q = &self.model.q;
        let inv: Vec<Complex64> = (0..b.len()).map(|n| ONE / (self.diagonal(n) - sigma)).collect();
        let y: Vec<Complex64> = b.iter().zip(&inv).map(|(b, i)| b * i).collect();
        // S = I − QᵀΛ⁻¹Q, written so that it does not cancel when σ is close to
        // an eigenvalue: Λ⁻¹ = 1 + (σ + iηd)/(1 − σ − iηd).
        let mut s = small::zeros();
        for j in 0..k {
            for l in 0..=j {
                let mut acc = ZERO;
                let mut gram = 0.0;
                for n in 0..b.len() {
                    let qq = q[j][n] * q[l][n];
                    acc += qq * (ONE - self.diagonal(n) + sigma) * inv[n];
                    gram += qq;
                }
                let id = if j == l { 1.0 } else { 0.0 };
                s[j][l] = Complex64::new(id - gram, 0.0) - acc;
                s[l][j] = s[j][l];
            }
        }
        let rhs: Vec<Complex64> = q.iter().map(|q| dot_q(q, &y)).collect();
        let z = small::solve(&s, &rhs, k)
            .ok_or_else(|| Error::EigendecompositionFailure(format!("shift {sigma} is an eigenvalue")))?;
        Ok((0..b.len())
            .map(|n| {
                let low: Complex64 = q.iter().zip(&z).map(|(q, z)| z * q[n]).sum();
                y[n] + inv[n] * low
            })
            .collect())
    }

    /// `xᵀAy`, evaluated through the orthogonal complement of the invariants
    /// so that nearly-hydrodynamic vectors do not lose their small part.
    fn bilinear_form(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let perp = |v: &[Complex64]| -> Vec<Complex64> {
            let c: Vec<Complex64> = self.model.q.iter().map(|q| dot_q(q, v)).collect();
            (0..v.len()).map(|n| v[n] - self.model.q.iter().zip(&c).map(|(q, c)| c * q[n]).sum::<Complex64>()).collect()
        };
        let (px, py) = (perp(x), perp(y));
        let transport: Complex64 = (0..x.len()).map(|n| x[n] * y[n] * self.model.drift[n]).sum();
        bilinear(&px, &py) - Complex64::new(0.0, self.eta) * transport
    }

    /// The `k` eigenvalues of smallest modulus, by shift-invert subspace
    /// iteration started from the invariants and a two-sided Ritz step.
    pub fn fluid_eigenvalues(&self) -> Result<Vec<Complex64>> {
        let k = self.model.rank();
        let sigma = Complex64::new(SUBSPACE_SHIFT, 0.0);
        let mut x: Vec<Vec<Complex64>> =
            self.model.q.iter().map(|q| q.iter().map(|&v| Complex64::new(v, 0.0)).collect()).collect();
        orthonormalize(&mut x)?;
        let mut converged = false;
        for _ in 0..SUBSPACE_MAX_ITER {
            let mut y = x.iter().map(|v| self.solve_shifted(sigma, v)).collect::<Result<Vec<_>>>()?;
            orthonormalize(&mut y)?;
            // Distance between the old and new subspaces.
            let mut change = 0.0;
            for v in &y {
                let c: Vec<Complex64> = x.iter().map(|u| hermitian(u, v)).collect();
                let r: f64 = (0..v.len())
                    .map(|n| (v[n] - x.iter().zip(&c).map(|(u, c)| c * u[n]).sum::<Complex64>()).norm_sqr())
                    .sum();
                change += r;
            }
            x = y;
            if change.sqrt() <= SUBSPACE_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::EigendecompositionFailure("subspace iteration did not converge".into()));
        }
        let mut b = small::zeros();
        let mut m = small::zeros();
        for i in 0..k {
            for j in 0..k {
                b[i][j] = self.bilinear_form(&x[i], &x[j]);
                m[i][j] = bilinear(&x[i], &x[j]);
            }
        }
        // Ritz values: eigenvalues of M⁻¹B.
        let mut c = small::zeros();
        for j in 0..k {
            let col: Vec<Complex64> = (0..k).map(|i| b[i][j]).collect();
            let sol = small::solve(&m, &col, k)
                .ok_or_else(|| Error::EigendecompositionFailure("degenerate Ritz basis".into()))?;
            for i in 0..k {
                c[i][j] = sol[i];
            }
        }
        Ok(small::eigenvalues(&c, k))
    }

    /// `‖(A − μ)x‖ / ‖x‖`.
    pub fn residual(&self, mu: Complex64, x: &[Complex64]) -> f64 {
        let ax = self.apply(x);
        let r: f64 = ax.iter().zip(x).map(|(a, x)| (a - mu * x).norm_sqr()).sum();
        let nx: f64 = x.iter().map(|x| x.norm_sqr()).sum();
        (r / nx).sqrt()
    }
}

/// Modified Gram–Schmidt, twice, in the Hermitian product.
fn orthonormalize(v: &mut [Vec<Complex64>]) -> Result<()> {
    for i in 0..v.len() {
        for _ in 0..2 {
            for j in 0..i {
                let c = hermitian(&v[j], &v[i]);
                let (head, tail) = v.split_at_mut(i);
                tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nrm = v[i].iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 0.0) {
            return Err(Error::EigendecompositionFailure("subspace collapsed".into()));
        }
        v[i].iter_mut().for_each(|a| *a /= nrm);
    }
    Ok(())
}
