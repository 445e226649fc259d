//! One-dimensional quadrature helpers.

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[0, 1]`, nodes ascending.
pub fn gauss_legendre_unit(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let rule = GaussLegendre::new(n).map_err(|_| Error::InvalidGrid(format!("Gauss–Legendre order {n} < 2")))?;
    let mut pairs: Vec<(f64, f64)> =
        rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending and
/// exactly antisymmetric (`x[n-1-j] == -x[j]`).
pub fn gauss_legendre_symmetric(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let rule = GaussLegendre::new(n).map_err(|_| Error::InvalidGrid(format!("Gauss–Legendre order {n} < 2")))?;
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut x, mut w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    // Symmetrize so that reflection u -> -u is an exact permutation of nodes.
    for j in 0..n / 2 {
        let k = n - 1 - j;
        let xs = 0.5 * (x[k] - x[j]);
        let ws = 0.5 * (w[k] + w[j]);
        x[j] = -xs;
        x[k] = xs;
        w[j] = ws;
        w[k] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// Panel layout used by [`radial_integral`]: substitution `r = e^t` with
/// `t` in `[T_MIN, T_MAX]`.
const T_MIN: f64 = -35.0;
const T_MAX: f64 = 70.0;
const PANELS: usize = 300;
const PANEL_ORDER: usize = 16;

/// High-accuracy `∫_0^∞ f(r) dr` for integrands that are smooth in `ln r`
/// and decay algebraically or faster at both ends.
pub fn radial_integral<F: Fn(f64) -> f64>(f: F) -> f64 {
    let (x, w) = gauss_legendre_unit(PANEL_ORDER).expect("fixed order");
    let h = (T_MAX - T_MIN) / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let t0 = T_MIN + h * p as f64;
        let mut panel = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let r = (t0 + h * xi).exp();
            panel += wi * f(r) * r;
        }
        total += panel * h;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit(8).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 1.0 / 8.0).abs() < 1e-15);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn symmetric_rule_is_exactly_reflective() {
        let (x, w) = gauss_legendre_symmetric(9).unwrap();
        for j in 0..9 {
            assert_eq!(x[j], -x[8 - j]);
            assert_eq!(w[j], w[8 - j]);
        }
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((s - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn radial_integral_matches_closed_forms() {
        // ∫ r^2 e^{-r^2/2} dr = sqrt(pi/2)
        let g = radial_integral(|r| r * r * (-0.5 * r * r).exp());
        assert!((g - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-14);
        // ∫ r^2 (1+r^2)^{-3} dr = pi/16
        let p = radial_integral(|r| r * r / (1.0 + r * r).powi(3));
        assert!((p - std::f64::consts::PI / 16.0).abs() < 1e-14);
    }
}
