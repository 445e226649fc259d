//! The four commands, each run for one parameter set into its own directory.

use std::fs;
use std::path::{Path, PathBuf};

use kinfluid::asymptotics::{scaling_report, ScalingReport};
use kinfluid::collision::AmplitudeReport;
use kinfluid::config::RunConfig;
use kinfluid::macro_evolution::{LimitReport, MomentTrajectory, Route};
use kinfluid::spectral::{SpectralBranch, SpectralModel};
use kinfluid::suite::{
    evaluate, run_amplitude, run_evolution, run_spectrum, run_suite, spectral_model, track, CensusRow,
    CriterionOutcome, CrossCheck, Evidence, SpectrumRun, Status,
};
use kinfluid::EquilibriumSpec;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{write_branch_csv, write_json, write_trajectory_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Scaling,
    Evolve,
    Verify,
}

impl Command {
    /// Criteria decided by the command's outputs.
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Command::Spectrum => &[1, 6],
            Command::Scaling => &[2, 3, 4, 5, 7, 8],
            Command::Evolve => &[9, 10],
            Command::Verify => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        }
    }
}

pub const SPECTRUM_SUMMARY: &str = "spectrum_summary.json";
pub const SCALING_REPORT: &str = "scaling_report.json";
pub const LIMIT_REPORT: &str = "limit_report.json";
pub const VERIFY_REPORT: &str = "verify_report.json";

fn passed(outcomes: &[CriterionOutcome]) -> bool {
    outcomes.iter().all(|o| o.status != Status::Fail)
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    set: &'a str,
    config: &'a RunConfig,
    branch_files: Vec<String>,
    census: &'a [CensusRow],
    cross_checks: &'a [CrossCheck],
    criteria: &'a [CriterionOutcome],
    passed: bool,
}

#[derive(Serialize)]
struct ScalingDocument<'a> {
    set: &'a str,
    config: &'a RunConfig,
    scaling: &'a ScalingReport,
    amplitude: Option<&'a AmplitudeReport>,
    criteria: &'a [CriterionOutcome],
    passed: bool,
}

#[derive(Serialize)]
struct TrajectoryEntry<'a> {
    file: String,
    xi: [f64; 3],
    epsilon: f64,
    eta: f64,
    gamma: f64,
    horizon: f64,
    seed: Option<u64>,
    routes: [Route; 2],
    fallback_reasons: &'a [String],
}

#[derive(Serialize)]
struct LimitDocument<'a> {
    set: &'a str,
    config: &'a RunConfig,
    seed: u64,
    kappa_reference: f64,
    trajectories: Vec<TrajectoryEntry<'a>>,
    report: &'a LimitReport,
    criteria: &'a [CriterionOutcome],
    passed: bool,
}

#[derive(Serialize)]
pub struct SetVerdict {
    pub set: String,
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct VerifyDocument {
    pub fast: bool,
    pub sets: Vec<SetVerdict>,
    pub passed: bool,
}

fn write_json_at<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    write_json(&path, value).map_err(|e| CliError::io(&path, e))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn keep(command: Command, outcomes: Vec<CriterionOutcome>) -> Vec<CriterionOutcome> {
    outcomes.into_iter().filter(|o| command.criteria().contains(&o.id)).collect()
}

fn write_branches(dir: &Path, branches: &[SpectralBranch]) -> Result<Vec<String>, CliError> {
    branches
        .iter()
        .map(|br| {
            let name = format!("branch_{}.csv", br.label.as_str());
            let path = dir.join(&name);
            write_branch_csv(&path, br).map_err(|e| CliError::io(&path, e))?;
            Ok(name)
        })
        .collect()
}

fn write_spectrum(
    dir: &Path,
    cfg: &RunConfig,
    run: &SpectrumRun,
    criteria: &[CriterionOutcome],
) -> Result<(), CliError> {
    create_dir(dir)?;
    let branch_files = write_branches(dir, &run.branches)?;
    let doc = SpectrumSummary {
        set: &cfg.name,
        config: cfg,
        branch_files,
        census: &run.census,
        cross_checks: &run.cross_checks,
        criteria,
        passed: passed(criteria),
    };
    write_json_at(dir, SPECTRUM_SUMMARY, &doc)
}

fn write_scaling(
    dir: &Path,
    cfg: &RunConfig,
    scaling: &ScalingReport,
    amplitude: Option<&AmplitudeReport>,
    criteria: &[CriterionOutcome],
) -> Result<(), CliError> {
    create_dir(dir)?;
    let doc = ScalingDocument { set: &cfg.name, config: cfg, scaling, amplitude, criteria, passed: passed(criteria) };
    write_json_at(dir, SCALING_REPORT, &doc)
}

fn write_limit(
    dir: &Path,
    cfg: &RunConfig,
    trajectories: &[MomentTrajectory],
    report: &LimitReport,
    criteria: &[CriterionOutcome],
) -> Result<(), CliError> {
    create_dir(dir)?;
    let mut entries = Vec::with_capacity(trajectories.len());
    for (i, tr) in trajectories.iter().enumerate() {
        let file = format!("trajectory_{i:02}.csv");
        let path = dir.join(&file);
        write_trajectory_csv(&path, tr, cfg.macro_.n_output).map_err(|e| CliError::io(&path, e))?;
        entries.push(TrajectoryEntry {
            file,
            xi: tr.xi,
            epsilon: tr.epsilon,
            eta: tr.eta,
            gamma: tr.gamma,
            horizon: tr.horizon,
            seed: tr.seed,
            routes: tr.routes,
            fallback_reasons: &tr.fallback_reasons,
        });
    }
    let doc = LimitDocument {
        set: &cfg.name,
        config: cfg,
        seed: cfg.macro_.seed,
        kappa_reference: report.kappa_reference,
        trajectories: entries,
        report,
        criteria,
        passed: passed(criteria),
    };
    write_json_at(dir, LIMIT_REPORT, &doc)
}

fn kappa_reference(scaling: &ScalingReport) -> Result<f64, CliError> {
    let k = scaling.diffusion.kappa_theta;
    if k > 0.0 && k.is_finite() {
        Ok(k)
    } else {
        Err(kinfluid::Error::InsufficientRange(format!("diffusion constant {k} is not usable")).into())
    }
}

struct Spectral {
    spec: EquilibriumSpec,
    model: SpectralModel,
    branches: Vec<SpectralBranch>,
    scaling: ScalingReport,
}

fn spectral(cfg: &RunConfig) -> Result<Spectral, CliError> {
    let (spec, model) = spectral_model(cfg)?;
    let (_, branches) = track(cfg, &model)?;
    let scaling = scaling_report(&model, &branches)?;
    Ok(Spectral { spec, model, branches, scaling })
}

/// Runs `command` for one set, writing into `dir`.
pub fn run(command: Command, cfg: &RunConfig, dir: &Path) -> Result<Vec<CriterionOutcome>, CliError> {
    let outcomes = match command {
        Command::Spectrum => {
            let (_, model) = spectral_model(cfg)?;
            let run = run_spectrum(cfg, &model)?;
            let ev = Evidence {
                cfg,
                model: &model,
                branches: Some(&run.branches),
                spectrum: Some(&run),
                scaling: None,
                amplitude: None,
                limit: None,
            };
            let out = keep(command, evaluate(&ev));
            write_spectrum(dir, cfg, &run, &out)?;
            out
        }
        Command::Scaling => {
            let s = spectral(cfg)?;
            let amplitude = if s.spec.is_gaussian() { None } else { Some(run_amplitude(cfg, &s.spec)?) };
            let ev = Evidence {
                cfg,
                model: &s.model,
                branches: Some(&s.branches),
                spectrum: None,
                scaling: Some(&s.scaling),
                amplitude: amplitude.as_ref(),
                limit: None,
            };
            let out = keep(command, evaluate(&ev));
            write_scaling(dir, cfg, &s.scaling, amplitude.as_ref(), &out)?;
            out
        }
        Command::Evolve => {
            let s = spectral(cfg)?;
            let (trajectories, report) = run_evolution(cfg, &s.spec, kappa_reference(&s.scaling)?)?;
            let ev = Evidence {
                cfg,
                model: &s.model,
                branches: None,
                spectrum: None,
                scaling: None,
                amplitude: None,
                limit: Some(&report),
            };
            let out = keep(command, evaluate(&ev));
            write_limit(dir, cfg, &trajectories, &report, &out)?;
            out
        }
        Command::Verify => {
            let run = run_suite(cfg)?;
            let out = run.outcomes.clone();
            let pick =
                |ids: &[u8]| -> Vec<CriterionOutcome> { out.iter().filter(|o| ids.contains(&o.id)).cloned().collect() };
            write_spectrum(dir, cfg, &run.spectrum, &pick(Command::Spectrum.criteria()))?;
            write_scaling(dir, cfg, &run.scaling, run.amplitude.as_ref(), &pick(Command::Scaling.criteria()))?;
            write_limit(dir, cfg, &run.trajectories, &run.limit, &pick(Command::Evolve.criteria()))?;
            out
        }
    };
    Ok(outcomes)
}

pub fn set_dir(out: &Path, cfg: &RunConfig) -> PathBuf {
    out.join(&cfg.name)
}
