//! Stage runners for one parameter set and the ten acceptance criteria.
//!
//! Each command of the driver runs a subset of the stages; criteria are
//! evaluated from whatever evidence the stages produced, so a command reports
//! exactly the criteria its outputs cover.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{scaling_report, ScalingReport};
use crate::collision::{verify_amplitude_estimates, AmplitudeReport};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::macro_evolution::{check_macroscopic_limit, run_trajectories, LimitReport, MomentTrajectory};
use crate::spectral::{
    eigenvalue_census, log_eta_grid, matrix_fluid_eigenvalues, track_branches, BranchLabel, SpectralBranch,
    SpectralModel,
};
use crate::velocity_space::EquilibriumSpec;

/// Census points per decade of `η`.
pub const CENSUS_POINTS_PER_DECADE: f64 = 8.0;
/// Wall-clock budget for the census of one set, seconds.
pub const CENSUS_TIME_LIMIT: f64 = 60.0;
/// Eigenvalues expected in the disk: three longitudinal, the transversal twice.
pub const FLUID_EIGENVALUES: usize = 5;

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "eigenvalue census"),
    (2, "gaussian sanity"),
    (3, "fractional dichotomy"),
    (4, "faster transversal decay"),
    (5, "defect bound"),
    (6, "method cross-validation"),
    (7, "limiting modes"),
    (8, "amplitude estimates"),
    (9, "macroscopic limit"),
    (10, "energy estimate"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    fn from_bool(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N/A",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub eta: f64,
    pub count: Option<usize>,
    pub error: Option<String>,
}

/// Dispersion root against the matching eigenvalue of the discretized
/// operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub eta: f64,
    pub label: BranchLabel,
    pub dispersion: Complex64,
    pub matrix: Option<Complex64>,
    /// `NaN` when the matrix route failed.
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumRun {
    pub etas: Vec<f64>,
    pub branches: Vec<SpectralBranch>,
    pub census: Vec<CensusRow>,
    pub cross_checks: Vec<CrossCheck>,
    /// Not serialized: outputs stay bit-identical across runs.
    #[serde(skip)]
    pub census_seconds: f64,
}

/// The spectral model on the configured grid.
pub fn spectral_model(cfg: &RunConfig) -> Result<(EquilibriumSpec, SpectralModel)> {
    cfg.validate()?;
    let spec = cfg.equilibrium.build()?;
    let g = &cfg.grid;
    let model = SpectralModel::build(&spec, g.n_radial, g.n_angular, g.radial_map)?;
    Ok((spec, model))
}

/// Branches on the configured grid of `η`.
pub fn track(cfg: &RunConfig, model: &SpectralModel) -> Result<(Vec<f64>, Vec<SpectralBranch>)> {
    let s = &cfg.spectral;
    let etas = log_eta_grid(s.eta_min, s.eta_max, s.n_eta)?;
    let branches = track_branches(model, &etas)?;
    Ok((etas, branches))
}

/// Census over the configured range, log-spaced.
pub fn census(cfg: &RunConfig, model: &SpectralModel) -> Result<(Vec<CensusRow>, f64)> {
    let s = &cfg.spectral;
    let n = if s.census_eta_max > s.census_eta_min {
        ((s.census_eta_max / s.census_eta_min).log10() * CENSUS_POINTS_PER_DECADE).round() as usize + 1
    } else {
        1
    };
    let etas = if n > 1 { log_eta_grid(s.census_eta_min, s.census_eta_max, n)? } else { vec![s.census_eta_max] };
    let start = Instant::now();
    let rows = etas
        .par_iter()
        .map(|&eta| match eigenvalue_census(model, eta, s.r_bar) {
            Ok(c) => CensusRow { eta, count: Some(c), error: None },
            Err(e) => CensusRow { eta, count: None, error: Some(e.to_string()) },
        })
        .collect();
    Ok((rows, start.elapsed().as_secs_f64()))
}

/// Compares every tracked root with the operator's fluid eigenvalues.
pub fn cross_validate(model: &SpectralModel, branches: &[SpectralBranch]) -> Vec<CrossCheck> {
    let Some(first) = branches.first() else { return Vec::new() };
    (0..first.samples.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let eta = first.samples[i].eta;
            let matrix = matrix_fluid_eigenvalues(model, eta).ok();
            branches
                .iter()
                .map(|br| {
                    let d = br.samples[i].mu;
                    let m = matrix.as_ref().map(|(long, t)| {
                        if br.label == BranchLabel::Transversal {
                            *t
                        } else {
                            long.iter().cloned().min_by(|a, b| (a - d).norm().total_cmp(&(b - d).norm())).unwrap_or(d)
                        }
                    });
                    let rel_error = m.map_or(f64::NAN, |m| (m - d).norm() / d.norm());
                    CrossCheck { eta, label: br.label, dispersion: d, matrix: m, rel_error }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn run_spectrum(cfg: &RunConfig, model: &SpectralModel) -> Result<SpectrumRun> {
    let (etas, branches) = track(cfg, model)?;
    let (census, census_seconds) = census(cfg, model)?;
    let cross_checks = cross_validate(model, &branches);
    Ok(SpectrumRun { etas, branches, census, cross_checks, census_seconds })
}

pub fn run_amplitude(cfg: &RunConfig, spec: &EquilibriumSpec) -> Result<AmplitudeReport> {
    verify_amplitude_estimates(spec, &cfg.amplitude.r_values)
}

/// Trajectories and limit report. `kappa_reference` is the spectral
/// `lim Re μ₀/η^ζ`, which sets the horizons.
pub fn run_evolution(
    cfg: &RunConfig,
    spec: &EquilibriumSpec,
    kappa_reference: f64,
) -> Result<(Vec<MomentTrajectory>, LimitReport)> {
    let g = &cfg.macro_.grid;
    let model = SpectralModel::build(spec, g.n_radial, g.n_angular, g.radial_map)?;
    let trajectories = run_trajectories(&model, &cfg.macro_, kappa_reference, cfg.spectral.eta_bar)?;
    let report = check_macroscopic_limit(&model, &cfg.macro_, &trajectories, kappa_reference, &cfg.tolerances)?;
    Ok((trajectories, report))
}

/// Outputs of the stages that ran; criteria without evidence are skipped.
#[derive(Debug, Clone, Copy)]
pub struct Evidence<'a> {
    pub cfg: &'a RunConfig,
    pub model: &'a SpectralModel,
    pub branches: Option<&'a [SpectralBranch]>,
    /// Census and cross-checks.
    pub spectrum: Option<&'a SpectrumRun>,
    pub scaling: Option<&'a ScalingReport>,
    pub amplitude: Option<&'a AmplitudeReport>,
    pub limit: Option<&'a LimitReport>,
}

fn outcome(id: u8, status: Status, detail: String) -> CriterionOutcome {
    let title = CRITERIA.iter().find(|(i, _)| *i == id).map_or("", |(_, t)| t).to_string();
    CriterionOutcome { id, title, status, detail }
}

fn not_applicable(id: u8, why: &str) -> CriterionOutcome {
    outcome(id, Status::NotApplicable, why.into())
}

fn is_classical_gaussian(spec: &EquilibriumSpec) -> bool {
    spec.is_gaussian() && spec.beta == 0.0
}

/// Leading-order Gaussian modes in closed form, in the basis
/// `(1, v₁, v₂, v₃, (|v|² − 3)/2)`.
pub fn gaussian_limit_coefficients(label: BranchLabel) -> [Complex64; 5] {
    let c = |x: f64| Complex64::new(x, 0.0);
    let z = c(0.0);
    match label {
        BranchLabel::Boussinesq => [c(-(0.4f64).sqrt()), z, z, z, c(2.0 / 10f64.sqrt())],
        BranchLabel::AcousticPlus => [c(0.3f64.sqrt()), c(-(0.5f64).sqrt()), z, z, c(2.0 / 30f64.sqrt())],
        BranchLabel::AcousticMinus => [c(0.3f64.sqrt()), c(0.5f64.sqrt()), z, z, c(2.0 / 30f64.sqrt())],
        BranchLabel::Transversal => [z, z, c(1.0), z, z],
    }
}

fn max_diff(a: &[Complex64; 5], b: &[Complex64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn census_outcome(ev: &Evidence) -> Option<CriterionOutcome> {
    let run = ev.spectrum?;
    let bad: Vec<&CensusRow> = run.census.iter().filter(|r| r.count != Some(FLUID_EIGENVALUES)).collect();
    let s = &ev.cfg.spectral;
    let in_time = run.census_seconds <= CENSUS_TIME_LIMIT;
    let detail = match bad.first() {
        None => format!(
            "{FLUID_EIGENVALUES} eigenvalues in |mu| < {} at all {} eta in [{:e}, {:e}]",
            s.r_bar,
            run.census.len(),
            s.census_eta_min,
            s.census_eta_max
        ),
        Some(first) => format!(
            "{} of {} eta miss the count; first at eta = {:.3e}: {}",
            bad.len(),
            run.census.len(),
            first.eta,
            first.count.map_or_else(|| first.error.clone().unwrap_or_default(), |c| format!("{c} eigenvalues"))
        ),
    };
    let detail = if in_time { detail } else { format!("{detail}; census exceeded {CENSUS_TIME_LIMIT} s") };
    Some(outcome(1, Status::from_bool(bad.is_empty() && in_time), detail))
}

fn gaussian_outcome(ev: &Evidence) -> Option<CriterionOutcome> {
    if !is_classical_gaussian(&ev.model.spec) {
        return Some(not_applicable(2, "only the Gaussian with beta = 0"));
    }
    let rep = ev.scaling?;
    let branches = ev.branches?;
    let tol = &ev.cfg.tolerances;
    let d_exact = (5.0f64 / 3.0).sqrt();
    let d_err = (rep.acoustic.d / d_exact - 1.0).abs();
    let mut pass = d_err <= tol.acoustic_speed_rel;
    let mut notes = vec![format!("D = {:.8} (rel err {d_err:.2e})", rep.acoustic.d)];
    // Difference quotients at the smallest sampled η.
    for br in branches {
        let Some(s) = br.samples.last() else { continue };
        let target = match br.label {
            BranchLabel::AcousticPlus => Complex64::new(0.0, d_exact),
            BranchLabel::AcousticMinus => Complex64::new(0.0, -d_exact),
            _ => Complex64::new(0.0, 0.0),
        };
        let err = (s.mu / s.eta - target).norm() / d_exact;
        pass &= err <= tol.acoustic_speed_rel;
        notes.push(format!("{} mu/eta off by {err:.2e}", br.label));
    }
    for b in &rep.branches {
        let e = b.re_fit.exponent;
        pass &= (e - 2.0).abs() <= tol.gaussian_slope;
        notes.push(format!("{} slope {e:.4}", b.label));
        if let Some(spread) = b.im_over_eta_spread {
            pass &= spread <= tol.im_over_eta_rel;
            notes.push(format!("{} Im mu/eta spread {spread:.2e}", b.label));
        }
    }
    Some(outcome(2, Status::from_bool(pass), notes.join("; ")))
}

fn slopes_outcome(ev: &Evidence) -> Option<CriterionOutcome> {
    if is_classical_gaussian(&ev.model.spec) {
        return Some(not_applicable(3, "the Gaussian is covered by criterion 2"));
    }
    let rep = ev.scaling?;
    let tol = &ev.cfg.tolerances;
    let check_im = ev.model.spec.beta == 0.0;
    let mut pass = true;
    let mut notes = Vec::new();
    for b in &rep.branches {
        let e = b.re_fit.exponent;
        let ok = (e - b.predicted_re_exponent).abs() <= tol.slope;
        pass &= ok;
        notes.push(format!("{} Re slope {e:.4} vs {:.4}", b.label, b.predicted_re_exponent));
        if check_im {
            if let Some(im) = &b.im_fit {
                pass &= (im.exponent - rep.prediction.im_exponent).abs() <= tol.im_slope;
                notes.push(format!("{} Im slope {:.4} vs {}", b.label, im.exponent, rep.prediction.im_exponent));
            }
        }
    }
    Some(outcome(3, Status::from_bool(pass), notes.join("; ")))
}

fn transversal_outcome(ev: &Evidence) -> Option<CriterionOutcome> {
    let rep = ev.scaling?;
    if rep.prediction.long_classical {
        return Some(not_applicable(4, "classical longitudinal scaling"));
    }
    let r = &rep.transversal_ratio_last_decade;
    if r.len() < 2 {
        return Some(outcome(4, Status::Fail, "fewer than two samples in the last decade".into()));
    }
    let monotone = r.windows(2).all(|w| w[1] < w[0]);
    let factor = r[0] / r[r.len() - 1];
    let pass = monotone && factor >= ev.cfg.tolerances.transversal_ratio_factor;
    let detail =
        format!("mu_t/Re mu_0 from {:.4e} to {:.4e} (factor {factor:.3}, monotone: {monotone})", r[0], r[r.len() - 1]);
    Some(outcome(4, Status::from_bool(pass), detail))
}

fn defect_outcome(ev: &Evidence) -> Option<CriterionOutcome> {
    let rep = ev.scaling?;
    let band = ev.cfg.tolerances.defect_band;
    let worst = rep.branches.iter().map(|b| b.defect_band).fold(0.0, f64::max);
    let notes: Vec<String> = rep.branches.iter().map(|b| format!("{} {:.4}", b.label, b.defect_band)).collect();
    Some(outcome(5, Status::from_bool(worst <= band), format!("max/min over window: {}", notes.join(", "))))
}

fn cross_validation_outcome(ev: &Evidence) -> Option<CriterionOutcome> {
    let run = ev.spectrum?;
    let tol = ev.cfg.tolerances.cross_validation_rel;
    let worst = run.cross_checks.iter().max_by(|a, b| {
        let key = |c: &CrossCheck| if c.rel_error.is_nan() { f64::INFINITY } else { c.rel_error };
        key(a).total_cmp(&key(b))
    });
    let Some(w) = worst else {
        return Some(outcome(6, Status::Fail, "no samples".into()));
    };
    let pass = run.cross_checks.iter().all(|c| c.rel_error <= tol);
    let detail = format!(
        "{} comparisons, worst {:.3e} ({} at eta = {:.3e})",
        run.cross_checks.len(),
        w.rel_error,
        w.label,
        w.eta
    );
    Some(outcome(6, Status::from_bool(pass), detail))
}

fn limit_mode_outcome(ev: &Evidence) -> Option<CriterionOutcome> {
    let rep = ev.scaling?;
    let tol = ev.cfg.tolerances.limit_mode;
    let gaussian = is_classical_gaussian(&ev.model.spec);
    let mut pass = true;
    let mut notes = Vec::new();
    for b in &rep.branches {
        let err = if gaussian {
            max_diff(&b.endpoint_coefficients, &gaussian_limit_coefficients(b.label))
        } else {
            b.endpoint_error
        };
        pass &= err <= tol;
        notes.push(format!("{} {err:.3e}", b.label));
    }
    let against = if gaussian { "closed forms" } else { "null-space solve" };
    Some(outcome(7, Status::from_bool(pass), format!("endpoint error vs {against}: {}", notes.join(", "))))
}

fn amplitude_outcome(ev: &Evidence) -> Option<CriterionOutcome> {
    if ev.model.spec.is_gaussian() {
        return Some(not_applicable(8, "no polynomial tail"));
    }
    let rep = ev.amplitude?;
    let tol = ev.cfg.tolerances.amplitude_slope;
    let mut pass = true;
    let mut notes = Vec::new();
    for row in &rep.inner {
        let target = row.target.unwrap_or(f64::NAN);
        pass &= (row.slope - target).abs() <= tol;
        notes.push(format!("{} slope {:.4} vs {target:.4}", row.label, row.slope));
    }
    let r = &rep.r_values;
    let range = format!("R in [{}, {}]", r.first().copied().unwrap_or(0.0), r.last().copied().unwrap_or(0.0));
    Some(outcome(8, Status::from_bool(pass), format!("{range}: {}", notes.join("; "))))
}

fn limit_outcome(ev: &Evidence, id: u8) -> Option<CriterionOutcome> {
    let rep = ev.limit?;
    let notes: Vec<String> = rep
        .checks
        .iter()
        .filter(|c| c.criterion == Some(id))
        .map(|c| format!("{} {:.4e} ({}) {}", c.name, c.value, c.target, if c.pass { "ok" } else { "failed" }))
        .collect();
    Some(outcome(id, Status::from_bool(rep.passed(id)), notes.join("; ")))
}

/// Outcomes for every criterion with enough evidence, in order.
pub fn evaluate(ev: &Evidence) -> Vec<CriterionOutcome> {
    [
        census_outcome(ev),
        gaussian_outcome(ev),
        slopes_outcome(ev),
        transversal_outcome(ev),
        defect_outcome(ev),
        cross_validation_outcome(ev),
        limit_mode_outcome(ev),
        amplitude_outcome(ev),
        limit_outcome(ev, 9),
        limit_outcome(ev, 10),
    ]
    .into_iter()
    .flatten()
    .collect()
}

/// Everything `verify` computes for one set.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub spec: EquilibriumSpec,
    pub model: SpectralModel,
    pub spectrum: SpectrumRun,
    pub scaling: ScalingReport,
    pub amplitude: Option<AmplitudeReport>,
    pub trajectories: Vec<MomentTrajectory>,
    pub limit: LimitReport,
    pub outcomes: Vec<CriterionOutcome>,
}

impl SuiteRun {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.status != Status::Fail)
    }
}

pub fn run_suite(cfg: &RunConfig) -> Result<SuiteRun> {
    let (spec, model) = spectral_model(cfg)?;
    let spectrum = run_spectrum(cfg, &model)?;
    let scaling = scaling_report(&model, &spectrum.branches)?;
    let amplitude = if spec.is_gaussian() { None } else { Some(run_amplitude(cfg, &spec)?) };
    let kappa = scaling.diffusion.kappa_theta;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InsufficientRange(format!("diffusion constant {kappa} is not usable")));
    }
    let (trajectories, limit) = run_evolution(cfg, &spec, kappa)?;
    let outcomes = evaluate(&Evidence {
        cfg,
        model: &model,
        branches: Some(&spectrum.branches),
        spectrum: Some(&spectrum),
        scaling: Some(&scaling),
        amplitude: amplitude.as_ref(),
        limit: Some(&limit),
    });
    Ok(SuiteRun { spec, model, spectrum, scaling, amplitude, trajectories, limit, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::limit_modes;
    use crate::velocity_space::RadialMap;

    fn small_gaussian() -> RunConfig {
        let mut c = RunConfig::shipped("gaussian").unwrap();
        c.grid.n_radial = 32;
        c.grid.n_angular = 12;
        c.spectral.n_eta = 13;
        c.spectral.eta_min = 1e-3;
        c.spectral.census_eta_min = 1e-2;
        c
    }

    #[test]
    fn closed_forms_match_the_null_space_solve() {
        let m =
            SpectralModel::build(&EquilibriumSpec::gaussian(0.0).unwrap(), 64, 16, RadialMap::Algebraic { scale: 1.0 })
                .unwrap();
        let l = limit_modes(&m).unwrap();
        for label in BranchLabel::ALL {
            let d = max_diff(&l.get(label), &gaussian_limit_coefficients(label));
            assert!(d < 1e-9, "{label} {d:e} {:?}", l.get(label));
        }
    }

    #[test]
    fn spectrum_stage_reports_census_and_cross_checks() {
        let cfg = small_gaussian();
        let (_, model) = spectral_model(&cfg).unwrap();
        let run = run_spectrum(&cfg, &model).unwrap();
        assert_eq!(run.census.len(), 9);
        assert!(run.census.iter().all(|r| r.count == Some(5)));
        assert_eq!(run.cross_checks.len(), 4 * cfg.spectral.n_eta);
        assert!(run.cross_checks.iter().all(|c| c.rel_error <= 1e-6), "{:?}", run.cross_checks);
        let ev = Evidence {
            cfg: &cfg,
            model: &model,
            branches: None,
            spectrum: Some(&run),
            scaling: None,
            amplitude: None,
            limit: None,
        };
        let out = evaluate(&ev);
        let ids: Vec<u8> = out.iter().map(|o| o.id).collect();
        // Criteria 3 and 8 are decided by the set alone.
        assert_eq!(ids, vec![1, 3, 6, 8]);
        assert!(out.iter().all(|o| o.status != Status::Fail), "{out:?}");
    }

    #[test]
    fn census_failure_is_reported_not_raised() {
        let cfg = small_gaussian();
        let (_, model) = spectral_model(&cfg).unwrap();
        let mut run = run_spectrum(&cfg, &model).unwrap();
        run.census[0].count = Some(3);
        let ev = Evidence {
            cfg: &cfg,
            model: &model,
            branches: None,
            spectrum: Some(&run),
            scaling: None,
            amplitude: None,
            limit: None,
        };
        let c1 = evaluate(&ev).into_iter().find(|o| o.id == 1).unwrap();
        assert_eq!(c1.status, Status::Fail);
        assert!(c1.detail.contains("3 eigenvalues"), "{}", c1.detail);
    }
}
