//! The five fluid eigenpairs of the Fourier-perturbed operator, from the
//! reduced dispersion relations and from the discretized operator, with
//! branch continuation in `η`.

mod dispersion;
mod modes;
mod operator;
mod small;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use dispersion::{DispersionSystem, Evaluation, Root};
pub use modes::{eigenmode_coefficients, ModeShape};
pub use operator::{PerturbedOperator, SectorModel};
pub use small::Mat3;

use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::velocity_space::{EquilibriumSpec, RadialMap, Sector, VelocityGrid};

/// Default census radius `r̄ = λ/2`.
pub const DEFAULT_R_BAR: f64 = 0.5;
/// Default upper end `η̄` of the validity range.
pub const DEFAULT_ETA_BAR: f64 = 0.1;
/// A continuation step is rejected when the corrector moves further than
/// this multiple of the predicted step.
pub const BRANCH_TRUST: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchLabel {
    Boussinesq,
    AcousticPlus,
    AcousticMinus,
    Transversal,
}

impl BranchLabel {
    pub const ALL: [BranchLabel; 4] =
        [BranchLabel::Boussinesq, BranchLabel::AcousticPlus, BranchLabel::AcousticMinus, BranchLabel::Transversal];

    pub fn as_str(self) -> &'static str {
        match self {
            BranchLabel::Boussinesq => "boussinesq",
            BranchLabel::AcousticPlus => "acoustic_plus",
            BranchLabel::AcousticMinus => "acoustic_minus",
            BranchLabel::Transversal => "transversal",
        }
    }

    pub fn sector(self) -> Sector {
        match self {
            BranchLabel::Transversal => Sector::Transverse,
            _ => Sector::Longitudinal,
        }
    }

    /// Algebraic multiplicity in the full three-dimensional problem.
    pub fn multiplicity(self) -> usize {
        match self {
            BranchLabel::Transversal => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub eta: f64,
    pub mu: Complex64,
    pub coefficients: [Complex64; 5],
    pub defect: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBranch {
    pub label: BranchLabel,
    /// Samples in the order computed (descending `η`).
    pub samples: Vec<BranchSample>,
}

impl SpectralBranch {
    pub fn etas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.eta).collect()
    }
}

/// Sector models for one equilibrium and grid resolution.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub spec: EquilibriumSpec,
    pub longitudinal: SectorModel,
    pub transverse: SectorModel,
}

impl SpectralModel {
    pub fn build(spec: &EquilibriumSpec, n_radial: usize, n_angular: usize, map: RadialMap) -> Result<Self> {
        let sector = |s| -> Result<SectorModel> {
            let grid = VelocityGrid::build(spec, n_radial, n_angular, s, map)?;
            SectorModel::new(CollisionOperator::new(grid)?)
        };
        Ok(Self { spec: *spec, longitudinal: sector(Sector::Longitudinal)?, transverse: sector(Sector::Transverse)? })
    }

    pub fn sector(&self, s: Sector) -> &SectorModel {
        match s {
            Sector::Longitudinal => &self.longitudinal,
            Sector::Transverse => &self.transverse,
        }
    }

    /// The acoustic speed `D` of `μ± ≈ ±iDη`.
    pub fn acoustic_speed(&self) -> f64 {
        acoustic_speed_sq(&self.longitudinal).sqrt()
    }
}

/// `D² = N₀₁N₁₀ + N₁₂N₂₁`: the linear coefficient of the small-`η` expansion
/// `det 𝒜(η, ημ̃)/η³ → μ̃³ + D²μ̃`.
pub fn acoustic_speed_sq(model: &SectorModel) -> f64 {
    let n = model.drift_matrix();
    (n[0][1] * n[1][0] + n[1][2] * n[2][1]).re
}

/// Assembled operator matrix (dense) for one sector.
pub fn assemble_perturbed_operator(model: &SectorModel, eta: f64) -> Result<faer::Mat<faer::complex_native::c64>> {
    Ok(PerturbedOperator::new(model, eta)?.dense())
}

/// Longitudinal roots `(μ₀, μ₊, μ₋)` seeded at `0, ±iDη`.
pub fn solve_longitudinal(model: &SpectralModel, eta: f64) -> Result<[Root; 3]> {
    let d = model.acoustic_speed();
    let seeds = [Complex64::new(0.0, 0.0), Complex64::new(0.0, d * eta), Complex64::new(0.0, -d * eta)];
    solve_longitudinal_from(model, eta, seeds)
}

fn solve_longitudinal_from(model: &SpectralModel, eta: f64, seeds: [Complex64; 3]) -> Result<[Root; 3]> {
    let sys = DispersionSystem::new(&model.longitudinal, eta)?;
    let roots = [sys.find_root(seeds[0])?, sys.find_root(seeds[1])?, sys.find_root(seeds[2])?];
    if eta > 0.0 {
        let scale = roots.iter().map(|r| r.mu.norm()).fold(0.0, f64::max);
        for i in 0..3 {
            for j in i + 1..3 {
                if (roots[i].mu - roots[j].mu).norm() <= 1e-8 * scale {
                    return Err(Error::RootCollision(format!(
                        "roots {} and {} coincide at eta = {eta}",
                        roots[i].mu, roots[j].mu
                    )));
                }
            }
        }
    }
    Ok(roots)
}

/// Transversal root seeded at `0`.
pub fn solve_transversal(model: &SpectralModel, eta: f64) -> Result<Root> {
    DispersionSystem::new(&model.transverse, eta)?.find_root(Complex64::new(0.0, 0.0))
}

/// The five fluid eigenvalues (transversal listed twice) in `|μ| < r̄`.
pub fn fluid_eigenvalues(model: &SpectralModel, eta: f64, r_bar: f64) -> Result<Vec<(BranchLabel, Complex64)>> {
    let count = eigenvalue_census(model, eta, r_bar)?;
    if count != 5 {
        return Err(Error::CountMismatch { eta, expected: 5, found: count });
    }
    let [b, p, m] = solve_longitudinal(model, eta)?;
    let t = solve_transversal(model, eta)?;
    let out = vec![
        (BranchLabel::Boussinesq, b.mu),
        (BranchLabel::AcousticPlus, p.mu),
        (BranchLabel::AcousticMinus, m.mu),
        (BranchLabel::Transversal, t.mu),
        (BranchLabel::Transversal, t.mu),
    ];
    if out.iter().any(|(_, z)| z.norm() >= r_bar) {
        return Err(Error::CountMismatch {
            eta,
            expected: 5,
            found: out.iter().filter(|(_, z)| z.norm() < r_bar).count(),
        });
    }
    Ok(out)
}

/// Eigenvalues of the full three-dimensional discretized operator in
/// `|μ| < r̄`, with the transverse sector counted twice.
pub fn eigenvalue_census(model: &SpectralModel, eta: f64, r_bar: f64) -> Result<usize> {
    let l = DispersionSystem::new(&model.longitudinal, eta)?.count_in_disk(r_bar)?;
    let t = DispersionSystem::new(&model.transverse, eta)?.count_in_disk(r_bar)?;
    Ok(l + 2 * t)
}

/// Fluid eigenvalues of the discretized operator by subspace iteration,
/// longitudinal first.
pub fn matrix_fluid_eigenvalues(model: &SpectralModel, eta: f64) -> Result<(Vec<Complex64>, Complex64)> {
    let l = PerturbedOperator::new(&model.longitudinal, eta)?.fluid_eigenvalues()?;
    let t = PerturbedOperator::new(&model.transverse, eta)?.fluid_eigenvalues()?;
    Ok((l, t[0]))
}

/// Log-spaced grid from `eta_max` down to `eta_min`.
pub fn log_eta_grid(eta_min: f64, eta_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(eta_min > 0.0 && eta_max > eta_min) {
        return Err(Error::InsufficientRange(format!(
            "need at least 2 points and 0 < eta_min < eta_max, got {n} on [{eta_min}, {eta_max}]"
        )));
    }
    let (a, b) = (eta_max.ln(), eta_min.ln());
    let mut out: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    // Endpoints exactly as configured.
    out[0] = eta_max;
    out[n - 1] = eta_min;
    Ok(out)
}

fn sample(system: &DispersionSystem, root: Root) -> Result<BranchSample> {
    let shape = eigenmode_coefficients(system, root.mu)?;
    Ok(BranchSample {
        eta: system.eta,
        mu: root.mu,
        coefficients: shape.coefficients,
        defect: shape.defect,
        residual: shape.residual,
    })
}

/// Log-log secant prediction from the last two `(η, μ)` points.
fn predict(history: &[(f64, Complex64)], eta: f64, initial_power: f64) -> Complex64 {
    match history {
        [.., (ea, a), (eb, b)] => {
            let p = (b / a).ln() / (eb / ea).ln();
            b * (p * (eta / eb).ln()).exp()
        }
        [(eb, b)] => b * (eta / eb).powf(initial_power),
        [] => Complex64::new(0.0, 0.0),
    }
}

fn initial_power(label: BranchLabel) -> f64 {
    if matches!(label, BranchLabel::AcousticPlus | BranchLabel::AcousticMinus) {
        1.0
    } else {
        2.0
    }
}

/// Steps per decade of the ascending sweep that seeds the largest `η`.
const SEED_STEPS_PER_DECADE: f64 = 16.0;

/// Roots at `eta_top`, continued upward from `eta_bottom` where the
/// small-`η` seeds `0, ±iDη` are reliable. Heavy tails with `β > 0` have
/// acoustic roots far from `±iDη` at moderate `η`.
pub fn seed_roots(model: &SpectralModel, eta_top: f64, eta_bottom: f64) -> Result<[Root; 4]> {
    let [b, p, m] = solve_longitudinal(model, eta_bottom)?;
    let t = solve_transversal(model, eta_bottom)?;
    let mut roots = [b, p, m, t];
    if eta_top <= eta_bottom {
        return Ok(roots);
    }
    let steps = ((eta_top / eta_bottom).log10() * SEED_STEPS_PER_DECADE).ceil().max(1.0) as usize;
    let mut history: Vec<Vec<(f64, Complex64)>> = roots.iter().map(|r| vec![(eta_bottom, r.mu)]).collect();
    for k in 1..=steps {
        let eta = eta_bottom * (eta_top / eta_bottom).powf(k as f64 / steps as f64);
        let long = DispersionSystem::new(&model.longitudinal, eta)?;
        let trans = DispersionSystem::new(&model.transverse, eta)?;
        for (i, label) in BranchLabel::ALL.iter().enumerate() {
            let pred = predict(&history[i], eta, initial_power(*label));
            let sys = if *label == BranchLabel::Transversal { &trans } else { &long };
            roots[i] = sys.find_root(pred)?;
            history[i].push((eta, roots[i].mu));
        }
    }
    Ok(roots)
}

/// Continues the four branches along a descending `η` grid.
pub fn track_branches(model: &SpectralModel, etas: &[f64]) -> Result<Vec<SpectralBranch>> {
    if etas.is_empty() {
        return Err(Error::InsufficientRange("empty eta grid".into()));
    }
    if etas.windows(2).any(|w| !(w[1] < w[0])) || !(etas[etas.len() - 1] > 0.0) {
        return Err(Error::InsufficientRange("eta grid must be positive and strictly descending".into()));
    }
    let mut branches: Vec<SpectralBranch> =
        BranchLabel::ALL.iter().map(|&label| SpectralBranch { label, samples: Vec::new() }).collect();
    for (step, &eta) in etas.iter().enumerate() {
        let long = DispersionSystem::new(&model.longitudinal, eta)?;
        let trans = DispersionSystem::new(&model.transverse, eta)?;
        let roots: [Root; 4] = if step == 0 {
            let [b, plus, minus, t] = seed_roots(model, eta, etas[etas.len() - 1])?;
            if !(plus.mu.im > 0.0 && minus.mu.im < 0.0) {
                return Err(Error::RootCollision(format!("acoustic pair not separated at eta = {eta}")));
            }
            let scale = [b, plus, minus].iter().map(|r| r.mu.norm()).fold(0.0, f64::max);
            if (b.mu - plus.mu).norm() <= 1e-8 * scale || (b.mu - minus.mu).norm() <= 1e-8 * scale {
                return Err(Error::RootCollision(format!("branches merged at eta = {eta}")));
            }
            [b, plus, minus, t]
        } else {
            let mut out = [Root { mu: Complex64::new(0.0, 0.0), residual: 0.0, iterations: 0 }; 4];
            for (i, br) in branches.iter().enumerate() {
                let history: Vec<(f64, Complex64)> = br.samples.iter().map(|s| (s.eta, s.mu)).collect();
                let pred = predict(&history, eta, initial_power(br.label));
                let prev = br.samples[br.samples.len() - 1].mu;
                let sys = if br.label == BranchLabel::Transversal { &trans } else { &long };
                let root = sys.find_root(pred)?;
                if (root.mu - pred).norm() > BRANCH_TRUST * (pred - prev).norm() {
                    return Err(Error::BranchJump { label: br.label.as_str().into(), eta });
                }
                out[i] = root;
            }
            let scale = out[..3].iter().map(|r| r.mu.norm()).fold(0.0, f64::max);
            for i in 0..3 {
                for j in i + 1..3 {
                    if (out[i].mu - out[j].mu).norm() <= 1e-8 * scale {
                        return Err(Error::RootCollision(format!("branches merged at eta = {eta}")));
                    }
                }
            }
            out
        };
        for (br, root) in branches.iter_mut().zip(roots) {
            let sys = if br.label == BranchLabel::Transversal { &trans } else { &long };
            br.samples.push(sample(sys, root)?);
        }
    }
    Ok(branches)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub(crate) fn model(spec: &EquilibriumSpec, sector: Sector, nr: usize, na: usize) -> SectorModel {
        let map = if spec.is_gaussian() {
            RadialMap::Algebraic { scale: 1.0 }
        } else {
            RadialMap::Logarithmic { scale: 1.0, span: 18.4 }
        };
        let grid = VelocityGrid::build(spec, nr, na, sector, map).unwrap();
        SectorModel::new(CollisionOperator::new(grid).unwrap()).unwrap()
    }

    /// Algebraic map for every tail: keeps the transport entries small
    /// enough for the unbalanced dense eigensolver used as a reference.
    pub(crate) fn dense_model(spec: &EquilibriumSpec, sector: Sector, nr: usize, na: usize) -> SectorModel {
        let grid = VelocityGrid::build(spec, nr, na, sector, RadialMap::Algebraic { scale: 1.0 }).unwrap();
        SectorModel::new(CollisionOperator::new(grid).unwrap()).unwrap()
    }
}
