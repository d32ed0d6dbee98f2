//! SDE models `dX = f(X) dt + sigma dW` on bounded domains.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Bounded open domain `E`.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(alloc::format!("interval requires a < b, got ({a}, {b})")));
        }
        Ok(Domain::Interval { a, b })
    }

    /// Symmetric interval `(-c, c)`.
    pub fn symmetric(c: f64) -> Result<Self> {
        Self::interval(-c, c)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(invalid("box bounds must be non-empty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(invalid("box requires lo < hi in every coordinate"));
        }
        Ok(Domain::Box { lo, hi })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("ball requires a non-empty center and radius > 0"));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { a, b } => *a < x[0] && x[0] < *b,
            Domain::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *l < *v && *v < *h)
            }
            Domain::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum();
                r2 < radius * radius
            }
        }
    }

    /// Distance to the boundary for points in the closure; zero on and
    /// outside the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        let d = match self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { center, radius } => {
                let r: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                radius - r
            }
        };
        d.max(0.0)
    }

    /// Fraction `theta` in `[0, 1]` along `from -> to` where the segment first
    /// leaves the domain. `from` must lie inside.
    pub fn exit_fraction(&self, from: &[f64], to: &[f64]) -> f64 {
        let axis_fraction = |p: f64, q: f64, l: f64, h: f64| -> f64 {
            if q <= l {
                (p - l) / (p - q)
            } else if q >= h {
                (h - p) / (q - p)
            } else {
                1.0
            }
        };
        let theta = match self {
            Domain::Interval { a, b } => axis_fraction(from[0], to[0], *a, *b),
            Domain::Box { lo, hi } => from
                .iter()
                .zip(to)
                .zip(lo.iter().zip(hi))
                .map(|((p, q), (l, h))| axis_fraction(*p, *q, *l, *h))
                .fold(1.0, f64::min),
            Domain::Ball { center, radius } => {
                // |p - c + theta (q - p)|^2 = r^2, smallest positive root
                let mut aa = 0.0;
                let mut bb = 0.0;
                let mut cc = -radius * radius;
                for ((p, q), c) in from.iter().zip(to).zip(center) {
                    let u = p - c;
                    let w = q - p;
                    aa += w * w;
                    bb += 2.0 * u * w;
                    cc += u * u;
                }
                if aa == 0.0 {
                    1.0
                } else {
                    let disc = (bb * bb - 4.0 * aa * cc).max(0.0).sqrt();
                    // cc < 0 inside, so the roots have opposite signs
                    let q = -0.5 * (bb + bb.signum() * disc);
                    if q == 0.0 {
                        1.0
                    } else {
                        (q / aa).max(cc / q)
                    }
                }
            }
        };
        theta.clamp(0.0, 1.0)
    }

    /// Projects a point that sits on the boundary up to rounding exactly onto it.
    pub(crate) fn snap_to_boundary(&self, x: &mut [f64]) {
        match self {
            Domain::Interval { a, b } => {
                x[0] = if (x[0] - a).abs() <= (b - x[0]).abs() { *a } else { *b };
            }
            Domain::Box { lo, hi } => {
                let mut best = (f64::INFINITY, 0usize, 0.0);
                for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
                    let dl = (x[i] - l).abs();
                    let dh = (h - x[i]).abs();
                    if dl < best.0 {
                        best = (dl, i, *l);
                    }
                    if dh < best.0 {
                        best = (dh, i, *h);
                    }
                }
                x[best.1] = best.2;
            }
            Domain::Ball { center, radius } => {
                let r: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                if r > 0.0 {
                    for (v, c) in x.iter_mut().zip(center) {
                        *v = c + (*v - c) * (radius / r);
                    }
                }
            }
        }
    }

    /// Uniform sample from the open domain (rejection from the bounding box for balls).
    pub fn sample_interior<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Domain::Interval { a, b } => loop {
                out[0] = a + (b - a) * rng.random::<f64>();
                if self.contains(out) {
                    break;
                }
            },
            Domain::Box { lo, hi } => loop {
                for (o, (l, h)) in out.iter_mut().zip(lo.iter().zip(hi)) {
                    *o = l + (h - l) * rng.random::<f64>();
                }
                if self.contains(out) {
                    break;
                }
            },
            Domain::Ball { center, radius } => loop {
                for (o, c) in out.iter_mut().zip(center) {
                    *o = c + radius * (2.0 * rng.random::<f64>() - 1.0);
                }
                if self.contains(out) {
                    break;
                }
            },
        }
    }
}

/// Vector field `f` together with its Jacobian `Df`.
///
/// Jacobians are row-major `d x d`: `jac[i * d + j] = d f_i / d x_j`.
pub trait DriftField: Send + Sync {
    fn dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
}

/// Scalar drift `f(x)` with derivative `f'(x)`.
pub trait ScalarDrift: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// Adapts a one-dimensional [`ScalarDrift`] to [`DriftField`].
pub struct Scalar<S>(pub S);

impl<S: ScalarDrift> DriftField for Scalar<S> {
    fn dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.value(x[0]);
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.derivative(x[0]);
    }
}

/// Drift given by closures, for ad hoc models and tests.
pub struct FnDrift<F, J> {
    pub dim: usize,
    pub drift: F,
    pub jacobian: J,
}

impl<F, J> DriftField for FnDrift<F, J>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
    J: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        (self.jacobian)(x, out)
    }
}

/// `dX = f(X) dt + sigma dW` killed at the boundary of `domain`.
pub struct SdeModel {
    field: Box<dyn DriftField>,
    sigma: f64,
    domain: Domain,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("dim", &self.dim())
            .field("sigma", &self.sigma)
            .field("domain", &self.domain)
            .finish()
    }
}

impl SdeModel {
    pub fn new(field: impl DriftField + 'static, sigma: f64, domain: Domain) -> Result<Self> {
        Self::from_boxed(Box::new(field), sigma, domain)
    }

    pub fn from_boxed(field: Box<dyn DriftField>, sigma: f64, domain: Domain) -> Result<Self> {
        if field.dim() == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if field.dim() != domain.dim() {
            return Err(invalid(alloc::format!(
                "drift dimension {} does not match domain dimension {}",
                field.dim(),
                domain.dim()
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(alloc::format!("sigma must be positive, got {sigma}")));
        }
        Ok(SdeModel { field, sigma, domain })
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn field(&self) -> &dyn DriftField {
        self.field.as_ref()
    }

    pub fn with_sigma(self, sigma: f64) -> Result<Self> {
        Self::from_boxed(self.field, sigma, self.domain)
    }

    pub fn with_domain(self, domain: Domain) -> Result<Self> {
        Self::from_boxed(self.field, self.sigma, domain)
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.field.drift(x, out)
    }

    #[inline]
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        self.field.jacobian(x, out)
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.field.drift(x, &mut out);
        out
    }

    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        self.field.jacobian(x, &mut out);
        out
    }

    /// Scalar drift `f(x)` of a one-dimensional model.
    pub fn drift_1d(&self, x: f64) -> f64 {
        let mut out = [0.0];
        self.field.drift(&[x], &mut out);
        out[0]
    }

    /// Scalar derivative `f'(x)` of a one-dimensional model.
    pub fn derivative_1d(&self, x: f64) -> f64 {
        let mut out = [0.0];
        self.field.jacobian(&[x], &mut out);
        out[0]
    }

    pub(crate) fn require_1d(&self) -> Result<(f64, f64)> {
        match self.domain {
            Domain::Interval { a, b } if self.dim() == 1 => Ok((a, b)),
            _ => Err(Error::NotOneDimensional { dim: self.dim() }),
        }
    }
}

/// `(lambda_plus(x), lambda_minus(x))`: extreme eigenvalues of the symmetric
/// part of `Df(x)`, i.e. the max and min of `<Df(x) r, r>` over unit `r`.
pub fn lambda_plus_minus(model: &SdeModel, x: &[f64]) -> Result<(f64, f64)> {
    let jac = model.jacobian(x);
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation { point: x.to_vec(), what: "jacobian" });
    }
    Ok(linalg::symmetric_part_extremes(&jac, model.dim()))
}

/// Result of comparing the analytic Jacobian with finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub n_points: usize,
    pub max_rel_error: f64,
    /// Points whose relative error exceeded the tolerance.
    pub failures: Vec<Vec<f64>>,
}

impl JacobianReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares `Df` with central differences of `f` (step `1e-5`) at `n_points`
/// uniform random interior points. Relative error is measured entrywise
/// against `max(1, |Df|_max)`.
pub fn check_jacobian(model: &SdeModel, n_points: usize, tol: f64, seed: u64) -> JacobianReport {
    const STEP: f64 = 1e-5;
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    let mut max_rel_error: f64 = 0.0;
    let mut failures = Vec::new();
    for _ in 0..n_points.max(1) {
        model.domain().sample_interior(&mut rng, &mut x);
        model.jacobian_into(&x, &mut jac);
        let scale = jac.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for j in 0..d {
            let keep = x[j];
            x[j] = keep + STEP;
            model.drift_into(&x, &mut fp);
            x[j] = keep - STEP;
            model.drift_into(&x, &mut fm);
            x[j] = keep;
            for i in 0..d {
                let fd = (fp[i] - fm[i]) / (2.0 * STEP);
                let err = (fd - jac[i * d + j]).abs() / scale;
                worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
            }
        }
        max_rel_error = max_rel_error.max(worst);
        if worst > tol {
            failures.push(x.clone());
        }
    }
    JacobianReport { n_points: n_points.max(1), max_rel_error, failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(m: [f64; 4]) -> SdeModel {
        SdeModel::new(
            FnDrift {
                dim: 2,
                drift: move |x: &[f64], out: &mut [f64]| {
                    out[0] = m[0] * x[0] + m[1] * x[1];
                    out[1] = m[2] * x[0] + m[3] * x[1];
                },
                jacobian: move |_: &[f64], out: &mut [f64]| out.copy_from_slice(&m),
            },
            1.0,
            Domain::ball(vec![0.0, 0.0], 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn lambda_bounds_of_diagonal_and_rotation() {
        let (hi, lo) = lambda_plus_minus(&linear([1.0, 0.0, 0.0, -2.0]), &[0.1, 0.2]).unwrap();
        assert_eq!((hi, lo), (1.0, -2.0));
        let (hi, lo) = lambda_plus_minus(&linear([0.0, -3.0, 3.0, 0.0]), &[0.1, 0.2]).unwrap();
        assert_eq!((hi, lo), (0.0, 0.0));
    }

    #[test]
    fn non_finite_jacobian_is_reported() {
        let model = linear([f64::NAN, 0.0, 0.0, 1.0]);
        match lambda_plus_minus(&model, &[0.5, 0.0]) {
            Err(Error::Evaluation { point, .. }) => assert_eq!(point, vec![0.5, 0.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::boxed(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(Domain::ball(vec![0.0], 0.0).is_err());
        assert!(Domain::ball(vec![0.0], 1.0).is_ok());
    }

    #[test]
    fn boundary_distance_is_zero_on_boundary() {
        let iv = Domain::interval(-1.0, 2.0).unwrap();
        assert_eq!(iv.boundary_distance(&[2.0]), 0.0);
        assert_eq!(iv.boundary_distance(&[0.0]), 1.0);
        let bx = Domain::boxed(vec![0.0, 0.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(bx.boundary_distance(&[0.5, 3.0]), 0.0);
        assert!((bx.boundary_distance(&[0.5, 1.0]) - 0.5).abs() < 1e-15);
        let ball = Domain::ball(vec![1.0, 1.0], 2.0).unwrap();
        assert_eq!(ball.boundary_distance(&[3.0, 1.0]), 0.0);
        assert!((ball.boundary_distance(&[1.0, 1.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exit_fraction_lands_on_boundary() {
        let ball = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let from = [0.3, 0.4];
        let to = [2.0, -1.0];
        let th = ball.exit_fraction(&from, &to);
        let p: Vec<f64> = from.iter().zip(&to).map(|(a, b)| a + th * (b - a)).collect();
        assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);

        let bx = Domain::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let th = bx.exit_fraction(&[0.5, 0.9], &[0.6, 1.4]);
        assert!((0.9 + th * 0.5 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_jacobian_fails_everywhere() {
        let model = SdeModel::new(
            FnDrift {
                dim: 1,
                drift: |x: &[f64], out: &mut [f64]| out[0] = x[0] - x[0] * x[0] * x[0],
                jacobian: |x: &[f64], out: &mut [f64]| out[0] = 2.0 - 3.0 * x[0] * x[0],
            },
            1.0,
            Domain::interval(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        let report = check_jacobian(&model, 25, 1e-5, 7);
        assert_eq!(report.failures.len(), 25);
    }
}
