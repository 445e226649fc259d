//! Fixed-size complex matrices of order 1 or 3 (the reduced systems).

use num_complex::Complex64;

pub type Mat3 = [[Complex64; 3]; 3];

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn zeros() -> Mat3 {
    [[ZERO; 3]; 3]
}

pub(crate) fn det(a: &Mat3, k: usize) -> Complex64 {
    match k {
        1 => a[0][0],
        3 => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
        _ => unreachable!("reduced systems have order 1 or 3"),
    }
}

/// Adjugate, so that `a·adj(a) = det(a)·I`.
pub(crate) fn adjugate(a: &Mat3, k: usize) -> Mat3 {
    let mut out = zeros();
    match k {
        1 => out[0][0] = ONE,
        3 => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    out[i][j] = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
                }
            }
        }
        _ => unreachable!("reduced systems have order 1 or 3"),
    }
    out
}

pub(crate) fn matvec(a: &Mat3, x: &[Complex64], k: usize) -> Vec<Complex64> {
    (0..k).map(|i| (0..k).map(|j| a[i][j] * x[j]).sum()).collect()
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` for an exactly singular pivot.
pub(crate) fn solve(a: &Mat3, b: &[Complex64], k: usize) -> Option<Vec<Complex64>> {
    let mut m = *a;
    let mut x: Vec<Complex64> = b[..k].to_vec();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| m[i][c].norm().total_cmp(&m[j][c].norm()))?;
        if m[p][c].norm() == 0.0 {
            return None;
        }
        m.swap(c, p);
        x.swap(c, p);
        for r in c + 1..k {
            let f = m[r][c] / m[c][c];
            for j in c..k {
                let t = m[c][j];
                m[r][j] -= f * t;
            }
            let t = x[c];
            x[r] -= f * t;
        }
    }
    for c in (0..k).rev() {
        let s: Complex64 = (c + 1..k).map(|j| m[c][j] * x[j]).sum();
        x[c] = (x[c] - s) / m[c][c];
    }
    Some(x)
}

/// Eigenvalues of a small complex matrix.
pub(crate) fn eigenvalues(a: &Mat3, k: usize) -> Vec<Complex64> {
    if k == 1 {
        return vec![a[0][0]];
    }
    let m = faer::Mat::<faer::complex_native::c64>::from_fn(k, k, |i, j| {
        faer::complex_native::c64::new(a[i][j].re, a[i][j].im)
    });
    m.complex_eigenvalues().into_iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat3 {
        let c = |a: f64, b: f64| Complex64::new(a, b);
        [
            [c(2.0, 1.0), c(0.5, 0.0), c(-1.0, 0.3)],
            [c(0.0, 1.0), c(3.0, 0.0), c(0.2, 0.2)],
            [c(1.0, 0.0), c(0.0, -2.0), c(1.0, 1.0)],
        ]
    }

    #[test]
    fn adjugate_inverts_up_to_determinant() {
        let a = sample();
        let adj = adjugate(&a, 3);
        let d = det(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let s: Complex64 = (0..3).map(|l| a[i][l] * adj[l][j]).sum();
                let e = if i == j { d } else { ZERO };
                assert!((s - e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_matches_matvec() {
        let a = sample();
        let x = vec![Complex64::new(1.0, -1.0), Complex64::new(0.5, 2.0), Complex64::new(-3.0, 0.0)];
        let b = matvec(&a, &x, 3);
        let y = solve(&a, &b, 3).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_have_vanishing_determinant() {
        let a = sample();
        for l in eigenvalues(&a, 3) {
            let mut s = a;
            for (i, row) in s.iter_mut().enumerate() {
                row[i] -= l;
            }
            assert!(det(&s, 3).norm() < 1e-10);
        }
    }
}
