//! Radially symmetric equilibria with polynomial or Gaussian tails.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::radial_integral;

/// Bisection bracket for the velocity dilation.
const DILATION_BRACKET: (f64, f64) = (1e-3, 1e3);
/// Relative bisection tolerance for the dilation.
const DILATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Polynomial,
    Gaussian,
}

/// Japanese bracket `⟨r⟩ = sqrt(1 + r²)`.
#[inline]
pub fn bracket(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

/// A normalized equilibrium `M(v) = c·m(|v|/a)` with either
/// `m(s) = ⟨s⟩^{-(3+α)}` or `m(s) = exp(-s²/2)`.
///
/// `m0`, `m2`, `m4` are the `⟨v⟩^{-β}`-weighted moments
/// `∫M`, `∫v₁²M`, `∫v₁²|v|²M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpec {
    pub kind: EquilibriumKind,
    pub alpha: f64,
    pub beta: f64,
    pub dilation: f64,
    pub norm_const: f64,
    pub m0: f64,
    pub m2: f64,
    pub m4: f64,
}

fn profile(kind: EquilibriumKind, alpha: f64, s: f64) -> f64 {
    match kind {
        EquilibriumKind::Polynomial => (1.0 + s * s).powf(-0.5 * (3.0 + alpha)),
        EquilibriumKind::Gaussian => (-0.5 * s * s).exp(),
    }
}

/// `4π ∫ r^{2+p} ⟨r⟩^{-β} m(r/a) dr` without the normalization constant.
fn raw_moment(kind: EquilibriumKind, alpha: f64, beta: f64, a: f64, p: i32) -> f64 {
    4.0 * PI * radial_integral(|r| r.powi(2 + p) * bracket(r).powf(-beta) * profile(kind, alpha, r / a))
}

impl EquilibriumSpec {
    /// Builds and normalizes an equilibrium: the constant fixes `m0 = 1`,
    /// a bisection on the dilation fixes `m2 = 1`; `m4` is whatever results.
    pub fn build(kind: EquilibriumKind, alpha: f64, beta: f64) -> Result<Self> {
        if !(beta > -1.0) {
            return Err(Error::ParameterDomain(format!("beta = {beta} must exceed -1")));
        }
        let alpha = match kind {
            EquilibriumKind::Gaussian => f64::INFINITY,
            EquilibriumKind::Polynomial => {
                if !(alpha > 5.0) {
                    return Err(Error::ParameterDomain(format!("alpha = {alpha} must exceed 5")));
                }
                if !(alpha + beta > 4.0) {
                    return Err(Error::ParameterDomain(format!("alpha + beta = {} must exceed 4", alpha + beta)));
                }
                alpha
            }
        };

        // ∫v₁² f(|v|) dv = (1/3)∫|v|² f(|v|) dv
        let ratio = |a: f64| raw_moment(kind, alpha, beta, a, 2) / (3.0 * raw_moment(kind, alpha, beta, a, 0)) - 1.0;
        let (mut lo, mut hi) = DILATION_BRACKET;
        let (flo, fhi) = (ratio(lo), ratio(hi));
        if !(flo < 0.0 && fhi > 0.0) {
            return Err(Error::NormalizationFailure(format!(
                "dilation objective does not change sign on [{lo}, {hi}] ({flo:e}, {fhi:e})"
            )));
        }
        while hi - lo > DILATION_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = 0.5 * (lo + hi);
        let c = 1.0 / raw_moment(kind, alpha, beta, a, 0);
        let m0 = c * raw_moment(kind, alpha, beta, a, 0);
        let m2 = c * raw_moment(kind, alpha, beta, a, 2) / 3.0;
        let m4 = c * raw_moment(kind, alpha, beta, a, 4) / 3.0;
        Ok(Self { kind, alpha, beta, dilation: a, norm_const: c, m0, m2, m4 })
    }

    pub fn gaussian(beta: f64) -> Result<Self> {
        Self::build(EquilibriumKind::Gaussian, f64::INFINITY, beta)
    }

    pub fn polynomial(alpha: f64, beta: f64) -> Result<Self> {
        Self::build(EquilibriumKind::Polynomial, alpha, beta)
    }

    /// Equilibrium density at speed `r`.
    #[inline]
    pub fn density(&self, r: f64) -> f64 {
        self.norm_const * profile(self.kind, self.alpha, r / self.dilation)
    }

    pub fn is_gaussian(&self) -> bool {
        self.kind == EquilibriumKind::Gaussian
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_beta0_is_standard_normal() {
        let s = EquilibriumSpec::gaussian(0.0).unwrap();
        assert!((s.dilation - 1.0).abs() < 1e-11);
        assert!((s.norm_const - (2.0 * PI).powf(-1.5)).abs() < 1e-12);
        assert!((s.m4 - 5.0).abs() < 1e-8);
    }

    #[test]
    fn polynomial_normalizations_hold() {
        for &(a, b) in &[(8.0, 0.0), (5.5, 0.0), (5.5, 2.0), (6.0, -0.5)] {
            let s = EquilibriumSpec::polynomial(a, b).unwrap();
            assert!((s.m0 - 1.0).abs() <= 1e-10, "{a} {b}");
            assert!((s.m2 - 1.0).abs() <= 1e-10, "{a} {b}");
            assert!(s.m4.is_finite() && s.m4 > 3.0);
        }
    }

    #[test]
    fn polynomial_alpha8_matches_independent_oracle() {
        // Independent oracle: closed-form Beta-function moments for beta = 0.
        // ∫_0^∞ r^{2+p} (1 + r²/a²)^{-(3+α)/2} dr = a^{3+p} B((3+p)/2, (α-p)/2)/2
        fn beta_fn(x: f64, y: f64) -> f64 {
            (ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp()
        }
        fn ln_gamma(x: f64) -> f64 {
            // Lanczos, g = 7
            const C: [f64; 9] = [
                0.999_999_999_999_809_9,
                676.520_368_121_885_1,
                -1_259.139_216_722_402_8,
                771.323_428_777_653_1,
                -176.615_029_162_140_6,
                12.507_343_278_686_905,
                -0.138_571_095_265_720_12,
                9.984_369_578_019_572e-6,
                1.505_632_735_149_311_6e-7,
            ];
            let x = x - 1.0;
            let mut s = C[0];
            for (i, c) in C.iter().enumerate().skip(1) {
                s += c / (x + i as f64);
            }
            let t = x + 7.5;
            0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
        }
        let alpha: f64 = 8.0;
        let s = EquilibriumSpec::polynomial(alpha, 0.0).unwrap();
        // m2/m0 = a² B(5/2,(α-2)/2) / (3 B(3/2, α/2)) = 1
        let a2 = 3.0 * beta_fn(1.5, alpha / 2.0) / beta_fn(2.5, (alpha - 2.0) / 2.0);
        assert!((s.dilation - a2.sqrt()).abs() < 1e-10);
        let m4 = a2 * beta_fn(3.5, (alpha - 4.0) / 2.0) / beta_fn(2.5, (alpha - 2.0) / 2.0);
        assert!((s.m4 - m4).abs() < 1e-9, "{} vs {}", s.m4, m4);
    }

    #[test]
    fn rejects_out_of_domain_parameters() {
        assert!(matches!(EquilibriumSpec::polynomial(4.5, 0.0), Err(Error::ParameterDomain(_))));
        assert!(matches!(EquilibriumSpec::polynomial(6.0, -1.5), Err(Error::ParameterDomain(_))));
        assert!(matches!(EquilibriumSpec::gaussian(-1.0), Err(Error::ParameterDomain(_))));
    }
}
