//! Weighted BGK collision operator `L f = ⟨v⟩^{-β}(𝒫f − f)` and the
//! projection onto its null space.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::loglog_fit;
use crate::error::{Error, Result};
use crate::velocity_space::{EquilibriumSpec, Gauge, GridFunction, RadialMap, Sector, VelocityGrid};

/// Spectral gap of the BGK instance.
pub const SPECTRAL_GAP: f64 = 1.0;

/// Radial nodes of the dedicated grid used for the amplitude estimates.
const AMPLITUDE_RADIAL_NODES: usize = 400;
const AMPLITUDE_ANGULAR_NODES: usize = 16;

/// `⟨·,·⟩_{-β}`-orthonormal basis of the collision invariants in one sector.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    pub sector: Sector,
    /// Orthonormal real profiles, φ-gauge.
    pub functions: Vec<Vec<f64>>,
    /// Gram matrix of the raw invariants (`1, v₁, |v|²` or `v_⊥`).
    pub raw_gram: Vec<Vec<f64>>,
}

impl ProjectionBasis {
    pub fn build(grid: &VelocityGrid) -> Result<Self> {
        let raw: Vec<Vec<f64>> = match grid.sector {
            Sector::Longitudinal => vec![vec![1.0; grid.len()], grid.v_par.clone(), grid.speed_sq.clone()],
            Sector::Transverse => vec![grid.v_perp.clone()],
        };
        let w = grid.weighted(-grid.spec.beta);
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&w).map(|((x, y), w)| x * y * w).sum() };
        let raw_gram = raw.iter().map(|a| raw.iter().map(|b| dot(a, b)).collect()).collect();
        // Modified Gram–Schmidt, applied twice for orthogonality at roundoff.
        let mut functions: Vec<Vec<f64>> = Vec::new();
        for f in &raw {
            let mut g = f.clone();
            for _ in 0..2 {
                for e in &functions {
                    let c = dot(&g, e);
                    g.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nrm = dot(&g, &g).sqrt();
            if !(nrm > 0.0) {
                return Err(Error::DegenerateNullspace("collision invariants are linearly dependent".into()));
            }
            g.iter_mut().for_each(|x| *x /= nrm);
            functions.push(g);
        }
        Ok(Self { sector: grid.sector, functions, raw_gram })
    }

    pub fn dim(&self) -> usize {
        self.functions.len()
    }
}

/// The BGK operator on one sector.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    pub grid: VelocityGrid,
    pub basis: ProjectionBasis,
    weights_minus_beta: Vec<f64>,
}

impl CollisionOperator {
    pub fn new(grid: VelocityGrid) -> Result<Self> {
        let basis = ProjectionBasis::build(&grid)?;
        let weights_minus_beta = grid.weighted(-grid.spec.beta);
        Ok(Self { grid, basis, weights_minus_beta })
    }

    pub fn spec(&self) -> &EquilibriumSpec {
        &self.grid.spec
    }

    fn check(&self, f: &GridFunction, gauge: Gauge) -> Result<()> {
        if f.sector != self.grid.sector || f.values.len() != self.grid.len() || f.gauge != gauge {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Coordinates `⟨f, e_k⟩_{-β}` of a φ-gauge function.
    pub fn coordinates(&self, f: &GridFunction) -> Result<Vec<Complex64>> {
        self.check(f, Gauge::Phi)?;
        Ok(self
            .basis
            .functions
            .iter()
            .map(|e| f.values.iter().zip(e).zip(&self.weights_minus_beta).map(|((x, e), w)| x * (e * w)).sum())
            .collect())
    }

    /// `𝒫f` for a φ-gauge function.
    pub fn apply_projection(&self, f: &GridFunction) -> Result<GridFunction> {
        let c = self.coordinates(f)?;
        let mut out = GridFunction::zeros(&self.grid, Gauge::Phi);
        for (ck, e) in c.iter().zip(&self.basis.functions) {
            out.values.iter_mut().zip(e).for_each(|(o, e)| *o += ck * e);
        }
        Ok(out)
    }

    /// `L f = ⟨v⟩^{-β}(𝒫f − f)` for a φ-gauge function.
    pub fn apply_l(&self, f: &GridFunction) -> Result<GridFunction> {
        let p = self.apply_projection(f)?;
        let beta = self.grid.spec.beta;
        let values = p
            .values
            .iter()
            .zip(&f.values)
            .zip(&self.grid.brackets)
            .map(|((p, f), b)| (p - f) * b.powf(-beta))
            .collect();
        Ok(GridFunction { values, ..p })
    }

    /// `L̃ g = ⟨v⟩^{-β/2}𝒫(⟨v⟩^{β/2}g) − g` for a ψ-gauge function.
    pub fn apply_l_tilde(&self, g: &GridFunction) -> Result<GridFunction> {
        self.check(g, Gauge::Psi)?;
        let phi = g.to_gauge(&self.grid, Gauge::Phi)?;
        let p = self.apply_projection(&phi)?.to_gauge(&self.grid, Gauge::Psi)?;
        p.axpy(Complex64::new(-1.0, 0.0), g)
    }
}

/// C² smoothstep on `[0, 1]`.
fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Inner cutoff: 1 on `B₁`, 0 outside `B₂`.
pub fn cutoff_inner(s: f64) -> f64 {
    1.0 - smoothstep(s - 1.0)
}

/// Annular cutoff: 0 on `B₁` and outside `B₄`, 1 on `B₃ \ B₂`.
pub fn cutoff_annulus(s: f64) -> f64 {
    if s <= 3.0 {
        smoothstep(s - 1.0)
    } else {
        1.0 - smoothstep(s - 3.0)
    }
}

/// One fitted amplitude profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmplitudeRow {
    pub label: String,
    pub norms: Vec<f64>,
    pub slope: f64,
    /// Predicted slope; `None` where only growth is reported.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmplitudeReport {
    pub r_values: Vec<f64>,
    /// The three inner-cutoff profiles `1`, `v₁`, `|v|² − 3`.
    pub inner: Vec<AmplitudeRow>,
    /// Annular profiles `|v|^k ⟨v⟩^β χ²_R`.
    pub annular: Vec<AmplitudeRow>,
    /// For the resonant annular power: norms divided by `sqrt(ln R)`.
    pub resonant_over_sqrt_log: Option<Vec<f64>>,
}

/// Fitted decay of `‖L(p·χ_R)‖_{L²(⟨v⟩^β M)}` against `R`.
pub fn verify_amplitude_estimates(spec: &EquilibriumSpec, r_values: &[f64]) -> Result<AmplitudeReport> {
    if r_values.len() < 4 {
        return Err(Error::InsufficientRange(format!("need at least 4 radii, got {}", r_values.len())));
    }
    if r_values.iter().any(|&r| !(r >= 1.0)) {
        return Err(Error::InsufficientRange("radii must be at least 1".into()));
    }
    let map = if spec.is_gaussian() {
        RadialMap::Algebraic { scale: 1.0 }
    } else {
        RadialMap::Logarithmic { scale: 1.0, span: 18.4 }
    };
    let grid = VelocityGrid::build(spec, AMPLITUDE_RADIAL_NODES, AMPLITUDE_ANGULAR_NODES, Sector::Longitudinal, map)?;
    let op = CollisionOperator::new(grid)?;
    let g = &op.grid;
    let beta = spec.beta;
    let wplus = g.weighted(beta);
    let norm_of = |profile: &dyn Fn(usize) -> f64| -> Result<f64> {
        let f = GridFunction::from_fn(g, Gauge::Phi, |n| Complex64::new(profile(n), 0.0));
        let lf = op.apply_l(&f)?;
        Ok(lf.values.iter().zip(&wplus).map(|(x, w)| x.norm_sqr() * w).sum::<f64>().sqrt())
    };
    let speed = |n: usize| g.speed_sq[n].sqrt();

    let ab = spec.alpha + beta;
    type Profile<'a> = Box<dyn Fn(usize) -> f64 + 'a>;
    let inner_defs: [(&str, f64, Profile); 3] = [
        ("one", -0.5 * ab, Box::new(|_| 1.0)),
        ("v_par", 1.0 - 0.5 * ab, Box::new(|n| g.v_par[n])),
        ("energy", 2.0 - 0.5 * ab, Box::new(|n| g.speed_sq[n] - 3.0)),
    ];
    let mut inner = Vec::new();
    for (label, target, p) in inner_defs.iter() {
        let norms =
            r_values.iter().map(|&r| norm_of(&|n| p(n) * cutoff_inner(speed(n) / r))).collect::<Result<Vec<_>>>()?;
        let (slope, _, _) = loglog_fit(r_values, &norms)?;
        let target = if spec.is_gaussian() { None } else { Some(*target) };
        inner.push(AmplitudeRow { label: (*label).into(), norms, slope, target });
    }

    let mut annular = Vec::new();
    let mut resonant_over_sqrt_log = None;
    if !spec.is_gaussian() {
        let half = 0.5 * (spec.alpha - beta);
        let k_max = half.ceil() as i32 + 1;
        for k in 0..=k_max {
            let norms = r_values
                .iter()
                .map(|&r| norm_of(&|n| speed(n).powi(k) * g.brackets[n].powf(beta) * cutoff_annulus(speed(n) / r)))
                .collect::<Result<Vec<_>>>()?;
            let (slope, _, _) = loglog_fit(r_values, &norms)?;
            let resonant = (k as f64 - half).abs() < 1e-12;
            if resonant {
                resonant_over_sqrt_log =
                    Some(norms.iter().zip(r_values).map(|(v, r)| v / r.ln().max(f64::MIN_POSITIVE).sqrt()).collect());
            }
            annular.push(AmplitudeRow {
                label: format!("annulus_k{k}"),
                norms,
                slope,
                target: if resonant { None } else { Some(k as f64 - half) },
            });
        }
    }
    Ok(AmplitudeReport { r_values: r_values.to_vec(), inner, annular, resonant_over_sqrt_log })
}
