//! Small dense and tridiagonal eigen-solvers.
//!
//! Only what the rest of the crate needs: extreme eigenvalues of small
//! symmetric matrices (cyclic Jacobi, closed forms for d <= 2) and the
//! principal eigenpair of a symmetric tridiagonal matrix (Sturm bisection
//! followed by inverse iteration).

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Eigenvalues of a symmetric `d x d` row-major matrix by cyclic Jacobi
/// rotations. The input is overwritten with the (nearly) diagonalized matrix.
///
/// Iterates until the off-diagonal Frobenius norm is at most
/// `1e-12 * ||A||_F` or 100 sweeps have run.
pub fn jacobi_eigenvalues(a: &mut [f64], d: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), d * d);
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = 1e-12 * norm;
    for _sweep in 0..100 {
        if off_diagonal_norm(a, d) <= target {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

/// Frobenius norm of the off-diagonal part.
pub fn off_diagonal_norm(a: &[f64], d: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                acc += a[i * d + j] * a[i * d + j];
            }
        }
    }
    acc.sqrt()
}

/// `(max, min)` eigenvalue of the symmetric part `(J + J^T)/2` of a
/// row-major `d x d` matrix.
pub fn symmetric_part_extremes(jac: &[f64], d: usize) -> (f64, f64) {
    match d {
        1 => (jac[0], jac[0]),
        2 => {
            let a = jac[0];
            let c = jac[3];
            let b = 0.5 * (jac[1] + jac[2]);
            let mean = 0.5 * (a + c);
            let half = 0.5 * (a - c);
            let rad = half.hypot(b);
            (mean + rad, mean - rad)
        }
        _ => {
            let mut sym = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    sym[i * d + j] = 0.5 * (jac[i * d + j] + jac[j * d + i]);
                }
            }
            let eig = jacobi_eigenvalues(&mut sym, d);
            let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            (max, min)
        }
    }
}

/// Symmetric tridiagonal matrix: `diag[i]` on the diagonal and `off[i]`
/// coupling rows `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::InvalidInput(alloc::format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(SymTridiag { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count from
    /// the LDL^T pivots of `T - x I`).
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * self.norm_inf().max(1.0);
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                let e = self.off[i - 1];
                q = (self.diag[i] - x) - e * e / q;
            }
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `y = T v`
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.off[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Bisection for the largest eigenvalue, down to a bracket of width `tol`
    /// or floating-point resolution, whichever is reached first.
    pub fn largest_eigenvalue(&self, tol: f64) -> f64 {
        let n = self.len();
        let (g_lo, g_hi) = self.gershgorin();
        let pad = 1e-12 * (g_hi - g_lo).abs().max(1.0);
        let mut lo = g_lo - pad;
        let mut hi = g_hi + pad;
        for _ in 0..400 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) == n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T - shift I) y = rhs` by Gaussian elimination with partial
    /// pivoting. Exactly singular pivots are nudged to machine precision.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let eps = f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        // Row i after elimination: u0[i] x_i + u1[i] x_{i+1} + u2[i] x_{i+2}.
        let mut u0: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut u1: Vec<f64> = vec![0.0; n];
        let mut u2: Vec<f64> = vec![0.0; n];
        let mut sub: Vec<f64> = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            u1[i] = self.off[i];
            sub[i + 1] = self.off[i];
        }
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            let lower = sub[i + 1];
            if lower.abs() > u0[i].abs() {
                // swap rows i and i+1
                let (r0, r1, r2) = (u0[i], u1[i], u2[i]);
                u0[i] = lower;
                u1[i] = u0[i + 1];
                u2[i] = if i + 2 < n { u1[i + 1] } else { 0.0 };
                let m = r0 / lower;
                u0[i + 1] = r1 - m * u1[i];
                u1[i + 1] = r2 - m * u2[i];
                b.swap(i, i + 1);
                b[i + 1] -= m * b[i];
            } else {
                if u0[i] == 0.0 {
                    u0[i] = eps;
                }
                let m = lower / u0[i];
                u0[i + 1] -= m * u1[i];
                u1[i + 1] -= m * u2[i];
                b[i + 1] -= m * b[i];
            }
        }
        if u0[n - 1] == 0.0 {
            u0[n - 1] = eps;
        }
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = b[i];
            if i + 1 < n {
                acc -= u1[i] * y[i + 1];
            }
            if i + 2 < n {
                acc -= u2[i] * y[i + 2];
            }
            y[i] = acc / u0[i];
        }
        y
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Principal (largest) eigenpair of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit Euclidean norm, sign chosen so the largest-magnitude entry is positive.
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Sturm bisection for the top eigenvalue, then inverse iteration for its
/// eigenvector. The residual target is `1e-10 * ||T||_inf` per unit vector.
pub fn principal_eigenpair(t: &SymTridiag, tol: f64) -> Result<Eigenpair> {
    let n = t.len();
    if n < 2 {
        return Err(Error::InvalidInput(alloc::format!("matrix of size {n} too small")));
    }
    let lambda = t.largest_eigenvalue(tol);
    let scale = t.norm_inf().max(1.0);
    let target = 1e-10 * scale;

    let attempt = |shift: f64| -> Option<(Vec<f64>, f64, usize)> {
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        for it in 1..=50 {
            let y = t.solve_shifted(shift, &v);
            let norm = norm2(&y);
            if !norm.is_finite() || norm == 0.0 {
                return None;
            }
            v = y.into_iter().map(|x| x / norm).collect();
            let tv = t.mul(&v);
            let residual = norm2(
                &tv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect::<Vec<_>>(),
            );
            if residual <= target {
                return Some((v, residual, it));
            }
        }
        None
    };

    let (mut vector, residual, iterations) = attempt(lambda)
        .or_else(|| attempt(lambda * (1.0 + 1e-10)))
        .ok_or_else(|| {
            Error::Solver(alloc::format!(
                "inverse iteration stagnated at shift {lambda:e}"
            ))
        })?;
    let pivot = vector
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        vector.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(Eigenpair { value: lambda, vector, residual, iterations })
}
