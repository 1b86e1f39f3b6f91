//! Cyclic Jacobi rotations for dense real symmetric matrices.

use serde::Serialize;

pub const DEFAULT_MAX_SWEEPS: usize = 100;
pub const OFF_DIAGONAL_TOL: f64 = 1.0e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobiResult {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Diagonalizes the row-major `order × order` symmetric matrix `a` until the
/// off-diagonal Frobenius norm is at most `OFF_DIAGONAL_TOL · ‖A‖_F`.
pub fn jacobi_eigenvalues(mut a: Vec<f64>, order: usize, max_sweeps: usize) -> JacobiResult {
    assert_eq!(a.len(), order * order, "matrix storage does not match order");
    let n = order;
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    let mut converged = off_norm(&a) <= OFF_DIAGONAL_TOL * frob;
    while !converged && sweeps < max_sweeps {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1.0e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
        converged = off_norm(&a) <= OFF_DIAGONAL_TOL * frob;
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    values.sort_by(f64::total_cmp);
    JacobiResult {
        values,
        sweeps,
        converged,
    }
}
