//! Scaling exponents, power-law fits and limit constants of the fluid
//! branches.

use faer::complex_native::c64;
use faer::prelude::*;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{BranchLabel, BranchSample, Mat3, SpectralBranch, SpectralModel};
use crate::velocity_space::{bracket, EquilibriumSpec};

/// Residual below which a sample may enter a fit window.
pub const WINDOW_RESIDUAL: f64 = 1e-10;
/// Coefficients smaller than this count as absent when reading off the
/// highest represented moment.
pub const MOMENT_THRESHOLD: f64 = 1e-8;
const MIN_FIT_SAMPLES: usize = 6;

/// Predicted exponents `Re μ ~ η^ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPrediction {
    pub zeta_long: f64,
    pub zeta_trans: f64,
    pub im_exponent: f64,
    pub long_classical: bool,
    pub trans_classical: bool,
}

fn check_parameters(alpha: f64, beta: f64) -> Result<()> {
    if !(beta > -1.0) {
        return Err(Error::ParameterDomain(format!("beta = {beta} must exceed -1")));
    }
    if alpha.is_finite() && !(alpha > 5.0 && alpha + beta > 4.0) {
        return Err(Error::ParameterDomain(format!(
            "(alpha, beta) = ({alpha}, {beta}) violates alpha > 5, alpha + beta > 4"
        )));
    }
    if alpha.is_nan() {
        return Err(Error::ParameterDomain("alpha is NaN".into()));
    }
    Ok(())
}

/// Exponent dichotomies; `alpha = ∞` stands for the Gaussian.
pub fn theoretical_exponents(alpha: f64, beta: f64) -> Result<ScalingPrediction> {
    check_parameters(alpha, beta)?;
    let long_classical = alpha > 6.0 + beta;
    let trans_classical = alpha > 4.0 + beta;
    let zeta_long = if long_classical { 2.0 } else { (alpha + beta - 4.0) / (1.0 + beta) };
    let zeta_trans = if trans_classical { 2.0 } else { (alpha + beta - 2.0) / (1.0 + beta) };
    Ok(ScalingPrediction { zeta_long, zeta_trans, im_exponent: 1.0, long_classical, trans_classical })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_samples: usize,
}

/// Least-squares line through `(ln x, ln y)`: `(slope, intercept, r²)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientRange(format!(
            "need at least 2 paired samples, got {}",
            xs.len().min(ys.len())
        )));
    }
    if let Some(i) = xs.iter().zip(ys).position(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::NonPositiveValue(i));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientRange("abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, my - slope * mx, r2))
}

/// Power-law fit `value ≈ amplitude·η^exponent` over `window` (inclusive,
/// with a small relative slack); `None` uses all samples.
pub fn fit_power_law(samples: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<ScalingFit> {
    let inside = |e: f64| match window {
        Some((lo, hi)) => e >= lo * (1.0 - 1e-9) && e <= hi * (1.0 + 1e-9),
        None => true,
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &(e, v)) in samples.iter().enumerate() {
        if inside(e) {
            if !(v > 0.0) || !(e > 0.0) {
                return Err(Error::NonPositiveValue(i));
            }
            xs.push(e);
            ys.push(v);
        }
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientRange(format!("need {MIN_FIT_SAMPLES} samples, got {}", xs.len())));
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(0.0, f64::max);
    if hi < 10.0 * lo * (1.0 - 1e-9) {
        return Err(Error::InsufficientRange(format!("samples span [{lo:e}, {hi:e}], less than a decade")));
    }
    let (exponent, intercept, r_squared) = loglog_fit(&xs, &ys)?;
    Ok(ScalingFit { exponent, amplitude: intercept.exp(), r_squared, window: (lo, hi), n_samples: xs.len() })
}

/// The smallest decade of `η` whose samples all have residual ≤ `tol`.
pub fn default_window(branch: &SpectralBranch, tol: f64) -> Result<(f64, f64)> {
    let good: Vec<f64> = branch.samples.iter().filter(|s| s.residual <= tol).map(|s| s.eta).collect();
    let lo = good.iter().cloned().fold(f64::INFINITY, f64::min);
    if !lo.is_finite() {
        return Err(Error::InsufficientRange(format!("no {} sample has residual below {tol:e}", branch.label)));
    }
    Ok((lo, 10.0 * lo))
}

fn in_window(s: &BranchSample, w: (f64, f64)) -> bool {
    s.eta >= w.0 * (1.0 - 1e-9) && s.eta <= w.1 * (1.0 + 1e-9)
}

/// Fit of `Re μ` against `η`.
pub fn fit_real_part(branch: &SpectralBranch, window: Option<(f64, f64)>) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = branch.samples.iter().map(|s| (s.eta, s.mu.re)).collect();
    fit_power_law(&pts, window)
}

/// Fit of `|Im μ|` against `η`.
pub fn fit_imaginary_part(branch: &SpectralBranch, window: Option<(f64, f64)>) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = branch.samples.iter().map(|s| (s.eta, s.mu.im.abs())).collect();
    fit_power_law(&pts, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcousticConstants {
    pub d: f64,
    /// `−∫v₁|φ₀,₊|²M` for the acoustic-plus limit mode.
    pub im_mu_bar: f64,
    /// `Im μ₊/η` at the smallest sampled `η`, when a branch is supplied.
    pub fitted_im_over_eta: Option<f64>,
}

/// `D` from the small-`η` expansion and the limit-mode integral for
/// `Im μ₊/η`.
pub fn acoustic_constants(model: &SpectralModel, acoustic_plus: Option<&SpectralBranch>) -> Result<AcousticConstants> {
    let d = model.acoustic_speed();
    let modes = limit_modes(model)?;
    let c = modes.acoustic_plus;
    let m = &model.longitudinal;
    let w = &m.op.grid.weights;
    let mut integral = 0.0;
    for n in 0..m.len() {
        let p = c[0] * m.profiles[0][n] + c[1] * m.profiles[1][n] + c[4] * m.profiles[2][n];
        integral += w[n] * m.op.grid.v_par[n] * p.norm_sqr();
    }
    let fitted_im_over_eta = acoustic_plus.and_then(|b| b.samples.last()).map(|s| s.mu.im / s.eta);
    Ok(AcousticConstants { d, im_mu_bar: -integral, fitted_im_over_eta })
}

/// Leading-order fluid modes, as coefficient vectors in
/// `(1, v₁, v₂, v₃, (|v|² − 3)/2)` with `‖·‖_{-β} = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitModes {
    pub boussinesq: [Complex64; 5],
    pub acoustic_plus: [Complex64; 5],
    pub acoustic_minus: [Complex64; 5],
    pub transversal: [Complex64; 5],
}

impl LimitModes {
    pub fn get(&self, label: BranchLabel) -> [Complex64; 5] {
        match label {
            BranchLabel::Boussinesq => self.boussinesq,
            BranchLabel::AcousticPlus => self.acoustic_plus,
            BranchLabel::AcousticMinus => self.acoustic_minus,
            BranchLabel::Transversal => self.transversal,
        }
    }
}

/// Null vectors of `μ̃I + iN` at `μ̃ ∈ {0, iD, −iD}`, with `N` the
/// `η`-linear part of the reduced system (so the actual `m4` enters).
pub fn limit_modes(model: &SpectralModel) -> Result<LimitModes> {
    let m = &model.longitudinal;
    let n = m.drift_matrix();
    let d = model.acoustic_speed();
    let gram = &m.gram;
    let solve = |mu: Complex64| -> Result<[Complex64; 5]> {
        let mut a: Mat3 = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = Complex64::new(0.0, 1.0) * n[i][j] + if i == j { mu } else { Complex64::new(0.0, 0.0) };
            }
        }
        let c = null_vector3(&a)?;
        let mut nrm = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                nrm += (c[i].conj() * c[j]).re * gram[i][j];
            }
        }
        let phase = c[2].conj() / c[2].norm();
        let s = phase / nrm.sqrt();
        Ok([c[0] * s, c[1] * s, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), c[2] * s])
    };
    let t = &model.transverse;
    let tn = t.gram[0][0].sqrt();
    let z = Complex64::new(0.0, 0.0);
    Ok(LimitModes {
        boussinesq: solve(z)?,
        acoustic_plus: solve(Complex64::new(0.0, d))?,
        acoustic_minus: solve(Complex64::new(0.0, -d))?,
        transversal: [z, z, Complex64::new(1.0 / tn, 0.0), z, z],
    })
}

/// Pairings of the leading-order fluid modes with the moment profiles.
///
/// Rows are the modes `(boussinesq, acoustic_plus, acoustic_minus, t₁, t₂)`,
/// columns the moments `(ρ, θ, σ·m, t₁·m, t₂·m)` with `σ` the wave direction;
/// entry `(l, k) = ⟨E_k, φ_l⟩_{-β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCoupling {
    pub matrix: [[Complex64; 5]; 5],
    pub inverse: [[Complex64; 5]; 5],
}

pub fn moment_coupling(model: &SpectralModel) -> Result<MomentCoupling> {
    let modes = limit_modes(model)?;
    let gram = &model.longitudinal.gram;
    let tn = model.transverse.gram[0][0].sqrt();
    let z = Complex64::new(0.0, 0.0);
    // Longitudinal profile j ↔ coefficient slot.
    const SLOT: [usize; 3] = [0, 1, 4];
    // Column k ↔ longitudinal profile (ρ, θ, σ·m).
    const PROFILE: [usize; 3] = [0, 2, 1];
    let mut matrix = [[z; 5]; 5];
    for (l, label) in
        [BranchLabel::Boussinesq, BranchLabel::AcousticPlus, BranchLabel::AcousticMinus].into_iter().enumerate()
    {
        let c = modes.get(label);
        for (k, &p) in PROFILE.iter().enumerate() {
            matrix[l][k] = (0..3).map(|j| c[SLOT[j]].conj() * gram[p][j]).sum();
        }
    }
    matrix[3][3] = Complex64::new(tn, 0.0);
    matrix[4][4] = Complex64::new(tn, 0.0);

    let m = faer::Mat::<c64>::from_fn(5, 5, |i, j| c64::new(matrix[i][j].re, matrix[i][j].im));
    let lu = m.partial_piv_lu();
    let inv = lu.solve(faer::Mat::<c64>::identity(5, 5));
    let mut inverse = [[z; 5]; 5];
    for (i, row) in inverse.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = Complex64::new(inv.read(i, j).re, inv.read(i, j).im);
        }
    }
    if inverse.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateNullspace("fluid modes do not span the moments".into()));
    }
    Ok(MomentCoupling { matrix, inverse })
}

fn null_vector3(a: &Mat3) -> Result<[Complex64; 3]> {
    // Largest column of the adjugate.
    let mut best = ([Complex64::new(0.0, 0.0); 3], 0.0);
    for j in 0..3 {
        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
        let col = [0, 1, 2].map(|i| {
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]
        });
        let s: f64 = col.iter().map(|z| z.norm_sqr()).sum();
        if s > best.1 {
            best = (col, s);
        }
    }
    let scale: f64 = a.iter().flatten().map(|z| z.norm_sqr()).sum();
    if !(best.1 > 1e-20 * scale * scale) {
        return Err(Error::DegenerateNullspace("limit system has a null space of dimension > 1".into()));
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConstants {
    /// `lim Re μ₀/η^ζ`.
    pub kappa_theta: f64,
    /// `lim μ_t/η^ζ̃`.
    pub kappa_transversal: f64,
}

/// `exp(mean(ln Re μ − ζ ln η))` over the window.
pub fn amplitude_at_exponent(branch: &SpectralBranch, zeta: f64, window: (f64, f64)) -> Result<f64> {
    let vals: Vec<f64> = branch
        .samples
        .iter()
        .filter(|s| in_window(s, window))
        .map(|s| if s.mu.re > 0.0 { Ok(s.mu.re.ln() - zeta * s.eta.ln()) } else { Err(Error::NonPositiveValue(0)) })
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(Error::InsufficientRange(format!("no {} samples in window", branch.label)));
    }
    Ok((vals.iter().sum::<f64>() / vals.len() as f64).exp())
}

pub fn diffusion_constants(branches: &[SpectralBranch], prediction: &ScalingPrediction) -> Result<DiffusionConstants> {
    let get = |l: BranchLabel| {
        branches.iter().find(|b| b.label == l).ok_or_else(|| Error::InsufficientRange(format!("missing {l} branch")))
    };
    let b = get(BranchLabel::Boussinesq)?;
    let t = get(BranchLabel::Transversal)?;
    let kappa_theta = amplitude_at_exponent(b, prediction.zeta_long, default_window(b, WINDOW_RESIDUAL)?)?;
    let kappa_transversal = amplitude_at_exponent(t, prediction.zeta_trans, default_window(t, WINDOW_RESIDUAL)?)?;
    Ok(DiffusionConstants { kappa_theta, kappa_transversal })
}

/// Coefficients at `η → 0`, extrapolated by a quadratic least-squares fit in
/// `x = Re μ/η` over the window samples (`x → 0` with `η`).
pub fn extrapolate_coefficients(branch: &SpectralBranch, window: (f64, f64)) -> Result<[Complex64; 5]> {
    let pts: Vec<&BranchSample> = branch.samples.iter().filter(|s| in_window(s, window)).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientRange(format!("need 3 samples to extrapolate {}", branch.label)));
    }
    let xs: Vec<f64> = pts.iter().map(|s| s.mu.re / s.eta).collect();
    let mut out = [Complex64::new(0.0, 0.0); 5];
    for (k, o) in out.iter_mut().enumerate() {
        let re = quadratic_intercept(&xs, &pts.iter().map(|s| s.coefficients[k].re).collect::<Vec<_>>())?;
        let im = quadratic_intercept(&xs, &pts.iter().map(|s| s.coefficients[k].im).collect::<Vec<_>>())?;
        *o = Complex64::new(re, im);
    }
    Ok(out)
}

/// Value at `x = 0` of the least-squares quadratic through `(x, y)`.
fn quadratic_intercept(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let scale = xs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(ys.iter().sum::<f64>() / ys.len() as f64);
    }
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (x, y) in xs.iter().zip(ys) {
        let t = x / scale;
        let row = [1.0, t, t * t];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let a: Mat3 = ata.map(|r| r.map(|v| Complex64::new(v, 0.0)));
    let b: Vec<Complex64> = atb.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let sol = solve3(&a, &b).ok_or_else(|| Error::InsufficientRange("degenerate extrapolation abscissae".into()))?;
    Ok(sol[0].re)
}

fn solve3(a: &Mat3, b: &[Complex64]) -> Option<Vec<Complex64>> {
    // Cramer's rule is adequate for the 3x3 normal equations.
    let det = |m: &Mat3| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.norm() == 0.0 {
        return None;
    }
    Some(
        (0..3)
            .map(|c| {
                let mut m = *a;
                for r in 0..3 {
                    m[r][c] = b[r];
                }
                det(&m) / d
            })
            .collect(),
    )
}

/// Highest polynomial degree present in `𝒫φ₀`: 2 if the energy coefficient
/// is present, 1 if only momentum, else 0.
pub fn highest_moment(c: &[Complex64; 5]) -> u32 {
    if c[4].norm() > MOMENT_THRESHOLD {
        2
    } else if c[1..4].iter().any(|z| z.norm() > MOMENT_THRESHOLD) {
        1
    } else {
        0
    }
}

/// `sup_u |Φ_η(u)|` over a fixed set of points, with
/// `Φ_η(u) = η^{k/(1+β)}φ_η(η^{-1/(1+β)}u)` and `φ_η = g·Σ C_j E_j`. Points
/// are taken along the wave direction and perpendicular to it.
pub fn rescaled_mode_sup(spec: &EquilibriumSpec, sample: &BranchSample, k: u32, u_values: &[f64]) -> f64 {
    let s = 1.0 + spec.beta;
    let stretch = sample.eta.powf(-1.0 / s);
    let prefactor = sample.eta.powf(k as f64 / s);
    let c = &sample.coefficients;
    let mut sup: f64 = 0.0;
    for &u in u_values {
        for (v1, vp) in [(u * stretch, 0.0), (-u * stretch, 0.0), (0.0, u * stretch)] {
            let r2 = v1 * v1 + vp * vp;
            let p = c[0] + c[1] * v1 + c[2] * vp + c[4] * (0.5 * (r2 - 3.0));
            let drift = bracket(r2.sqrt()).powf(spec.beta) * v1;
            let g = 1.0 / (Complex64::new(1.0, 0.0) - sample.mu - Complex64::new(0.0, sample.eta * drift));
            sup = sup.max((prefactor * g * p).norm());
        }
    }
    sup
}

/// Per-branch entry of the scaling report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchFitReport {
    pub label: BranchLabel,
    pub predicted_re_exponent: f64,
    pub re_fit: ScalingFit,
    pub im_fit: Option<ScalingFit>,
    /// `max/min` of `defect/√Re μ` over the window.
    pub defect_band: f64,
    /// Spread `max/min − 1` of `Im μ/η` over the window (acoustic only).
    pub im_over_eta_spread: Option<f64>,
    pub endpoint_coefficients: [Complex64; 5],
    pub limit_coefficients: [Complex64; 5],
    pub endpoint_error: f64,
    pub highest_moment: u32,
    /// Fitted exponent of `sup|Φ_η|` against `η` (≈ 0 when bounded).
    pub rescaled_sup_exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub prediction: ScalingPrediction,
    pub branches: Vec<BranchFitReport>,
    pub acoustic: AcousticConstants,
    pub diffusion: DiffusionConstants,
    /// `μ_t/Re μ₀` over the last decade of `η`, in descending `η`.
    pub transversal_ratio_last_decade: Vec<f64>,
    pub moment_coupling: MomentCoupling,
}

fn defect_band(branch: &SpectralBranch, window: (f64, f64)) -> f64 {
    let r: Vec<f64> = branch
        .samples
        .iter()
        .filter(|s| in_window(s, window))
        .map(|s| s.defect / s.mu.re.max(f64::MIN_POSITIVE).sqrt())
        .collect();
    let hi = r.iter().cloned().fold(0.0, f64::max);
    let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Everything the scaling command reports for one parameter set.
pub fn scaling_report(model: &SpectralModel, branches: &[SpectralBranch]) -> Result<ScalingReport> {
    let spec = &model.spec;
    let prediction = theoretical_exponents(spec.alpha, spec.beta)?;
    let limits = limit_modes(model)?;
    let mut out = Vec::new();
    for br in branches {
        let window = default_window(br, WINDOW_RESIDUAL)?;
        let re_fit = fit_real_part(br, Some(window))?;
        let acoustic = matches!(br.label, BranchLabel::AcousticPlus | BranchLabel::AcousticMinus);
        let (im_fit, spread) = if acoustic {
            let r: Vec<f64> =
                br.samples.iter().filter(|s| in_window(s, window)).map(|s| (s.mu.im / s.eta).abs()).collect();
            let hi = r.iter().cloned().fold(0.0, f64::max);
            let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
            (Some(fit_imaginary_part(br, Some(window))?), Some(hi / lo - 1.0))
        } else {
            (None, None)
        };
        let limit = limits.get(br.label);
        let endpoint = extrapolate_coefficients(br, window)?;
        let err = endpoint.iter().zip(&limit).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let k = highest_moment(&limit);
        let us = [0.5, 1.0, 2.0, 4.0];
        let sups: Vec<(f64, f64)> = br
            .samples
            .iter()
            .filter(|s| in_window(s, window))
            .map(|s| (s.eta, rescaled_mode_sup(spec, s, k, &us)))
            .collect();
        let rescaled = fit_power_law(&sups, None).ok().map(|f| f.exponent);
        out.push(BranchFitReport {
            label: br.label,
            predicted_re_exponent: if br.label == BranchLabel::Transversal {
                prediction.zeta_trans
            } else {
                prediction.zeta_long
            },
            re_fit,
            im_fit,
            defect_band: defect_band(br, window),
            im_over_eta_spread: spread,
            endpoint_coefficients: endpoint,
            limit_coefficients: limit,
            endpoint_error: err,
            highest_moment: k,
            rescaled_sup_exponent: rescaled,
        });
    }
    let plus = branches.iter().find(|b| b.label == BranchLabel::AcousticPlus);
    let acoustic = acoustic_constants(model, plus)?;
    let diffusion = diffusion_constants(branches, &prediction)?;
    let b = branches.iter().find(|b| b.label == BranchLabel::Boussinesq);
    let t = branches.iter().find(|b| b.label == BranchLabel::Transversal);
    let transversal_ratio_last_decade = match (b, t) {
        (Some(b), Some(t)) => {
            let emin = b.samples.iter().map(|s| s.eta).fold(f64::INFINITY, f64::min);
            b.samples
                .iter()
                .zip(&t.samples)
                .filter(|(s, _)| s.eta <= 10.0 * emin * (1.0 + 1e-9))
                .map(|(s, q)| q.mu.re / s.mu.re)
                .collect()
        }
        _ => Vec::new(),
    };
    Ok(ScalingReport {
        prediction,
        branches: out,
        acoustic,
        diffusion,
        transversal_ratio_last_decade,
        moment_coupling: moment_coupling(model)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity_space::RadialMap;
    use proptest::prelude::*;

    #[test]
    fn exponent_dichotomies() {
        let p = theoretical_exponents(8.0, 0.0).unwrap();
        assert_eq!((p.zeta_long, p.zeta_trans), (2.0, 2.0));
        assert!(p.long_classical && p.trans_classical);
        let p = theoretical_exponents(5.5, 0.0).unwrap();
        assert_eq!((p.zeta_long, p.zeta_trans), (1.5, 2.0));
        let p = theoretical_exponents(5.5, 2.0).unwrap();
        assert!((p.zeta_long - 7.0 / 6.0).abs() < 1e-15 && (p.zeta_trans - 11.0 / 6.0).abs() < 1e-15);
        let p = theoretical_exponents(f64::INFINITY, 0.0).unwrap();
        assert_eq!((p.zeta_long, p.zeta_trans), (2.0, 2.0));
        assert!(matches!(theoretical_exponents(4.5, 0.0), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let pts: Vec<(f64, f64)> =
            (0..10).map(|i| 10f64.powf(-1.0 - 0.25 * i as f64)).map(|e| (e, 3.0 * e.powf(1.5))).collect();
        let f = fit_power_law(&pts, None).unwrap();
        assert!((f.exponent - 1.5).abs() < 1e-12);
        assert!((f.amplitude - 3.0).abs() < 1e-10);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let short: Vec<(f64, f64)> = (0..5).map(|i| (10f64.powi(-i), 1.0)).collect();
        assert!(matches!(fit_power_law(&short, None), Err(Error::InsufficientRange(_))));
        let narrow: Vec<(f64, f64)> = (0..8).map(|i| (1.0 + 0.1 * i as f64, 1.0)).collect();
        assert!(matches!(fit_power_law(&narrow, None), Err(Error::InsufficientRange(_))));
        let mut neg: Vec<(f64, f64)> = (0..8).map(|i| (10f64.powi(-i), 1.0)).collect();
        neg[3].1 = -1.0;
        assert_eq!(fit_power_law(&neg, None), Err(Error::NonPositiveValue(3)));
    }

    #[test]
    fn gaussian_limit_modes_have_closed_forms() {
        let m =
            SpectralModel::build(&EquilibriumSpec::gaussian(0.0).unwrap(), 64, 16, RadialMap::Algebraic { scale: 1.0 })
                .unwrap();
        let l = limit_modes(&m).unwrap();
        let b = l.boussinesq;
        assert!((b[0].re + 0.4f64.sqrt()).abs() < 1e-9 && b[1].norm() < 1e-9, "{b:?}");
        assert!((b[4].re - 2.0 / 10f64.sqrt()).abs() < 1e-9);
        let p = l.acoustic_plus;
        assert!((p[0].re - 0.3f64.sqrt()).abs() < 1e-9);
        assert!((p[1].re + 0.5f64.sqrt()).abs() < 1e-9);
        assert!((p[4].re - 2.0 / 30f64.sqrt()).abs() < 1e-9);
        // 3/10 + 1/2 + 1/5 = 1 with ‖(|v|²−3)/2‖² = 3/2.
        let n = p[0].norm_sqr() + p[1].norm_sqr() + 1.5 * p[4].norm_sqr();
        assert!((n - 1.0).abs() < 1e-9);
        let c = acoustic_constants(&m, None).unwrap();
        assert!((c.d - (5.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert!((c.im_mu_bar - c.d).abs() < 1e-9);
        assert_eq!(highest_moment(&b), 2);
        assert_eq!(highest_moment(&l.transversal), 1);
    }

    #[test]
    fn acoustic_minus_limit_mirrors_plus() {
        let m = SpectralModel::build(
            &EquilibriumSpec::polynomial(8.0, 0.0).unwrap(),
            48,
            16,
            RadialMap::Logarithmic { scale: 1.0, span: 18.4 },
        )
        .unwrap();
        let l = limit_modes(&m).unwrap();
        assert!((l.acoustic_plus[1] + l.acoustic_minus[1]).norm() < 1e-9);
        assert!((l.acoustic_plus[0] - l.acoustic_minus[0]).norm() < 1e-9);
    }

    #[test]
    fn quadratic_extrapolation_is_exact_for_quadratics() {
        let xs = [0.1, 0.2, 0.3, 0.5];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - x + 3.0 * x * x).collect();
        assert!((quadratic_intercept(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn moment_coupling_has_the_block_structure() {
        for name in crate::config::SHIPPED_SETS {
            let cfg = crate::config::RunConfig::shipped(name).unwrap().into_fast();
            let (_, m) = crate::suite::spectral_model(&cfg).unwrap();
            let inv = moment_coupling(&m).unwrap().inverse;
            let tiny = |z: Complex64| z.norm() < 1e-9;
            let close = |a: Complex64, b: Complex64| (a - b).norm() < 1e-9;
            // Transverse block is decoupled and, with unit-norm modes, the identity.
            for i in 0..5 {
                for j in 0..5 {
                    if (i < 3) != (j < 3) {
                        assert!(tiny(inv[i][j]), "{name}: ({i},{j})");
                    }
                }
            }
            assert!(close(inv[3][3], inv[4][4]) && tiny(inv[3][4]) && tiny(inv[4][3]), "{name}");
            let (a1, a2, b1, b2, c1) = (inv[0][0], inv[0][1], inv[1][0], inv[1][1], inv[2][2]);
            assert!(close(inv[0][2], a2) && close(inv[1][2], b2), "{name}");
            assert!(tiny(inv[2][0]) && close(inv[2][1], -c1), "{name}");
            for z in [a1, a2, b1, b2, c1] {
                assert!(z.im.abs() < 1e-9, "{name}: {z}");
            }
            // With the Boussinesq mode normalized to a negative density
            // coefficient, `a₁` is negative; the rest are positive.
            assert!(a1.re < 0.0 && a2.re > 0.0 && b1.re > 0.0 && b2.re > 0.0 && c1.re > 0.0, "{name}: {inv:?}");
        }
    }

    proptest! {
        #[test]
        fn fitted_exponent_matches_synthetic(p in 0.2f64..3.0, a in 0.01f64..100.0) {
            let pts: Vec<(f64, f64)> = (0..12).map(|i| 10f64.powf(-0.2 * i as f64)).map(|e| (e, a * e.powf(p))).collect();
            let f = fit_power_law(&pts, None).unwrap();
            prop_assert!((f.exponent - p).abs() < 1e-10);
        }

        #[test]
        fn predictions_respect_ordering(alpha in 5.01f64..12.0, beta in -0.99f64..4.0) {
            prop_assume!(alpha + beta > 4.0);
            let p = theoretical_exponents(alpha, beta).unwrap();
            prop_assert!(p.zeta_long > 0.0 && p.zeta_long <= 2.0);
            prop_assert!(p.zeta_trans > 0.0 && p.zeta_trans <= 2.0);
            prop_assert!(p.zeta_trans >= p.zeta_long);
        }
    }
}
