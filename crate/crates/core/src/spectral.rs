//! One-dimensional spectral pipeline.
//!
//! For `dX = f(X) dt + sigma dW` killed at the ends of `(a, b)` the generator
//! `L = (sigma^2/2) d_xx + f d_x` is self-adjoint with respect to
//! `mu(dx) = exp(gamma(x)) dx`, `gamma(x) = (2/sigma^2) int_a^x f`. Writing it
//! in divergence form `(sigma^2/2) e^{-gamma} (e^{gamma} u')'` and
//! discretizing on a uniform grid gives a matrix that becomes symmetric
//! tridiagonal after conjugation with `diag(e^{gamma/2})`. Its top eigenpair
//! yields the survival rate `lambda0` and the eigenfunction `psi`, from which
//! the quasi-stationary density `nu`, the weight `eta`, the quasi-ergodic
//! density `m = psi^2 e^{gamma}` and the conditioned Lyapunov exponent
//! `lambda = int f' dm` follow.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, SymTridiag};
use crate::model::SdeModel;

/// Default number of interior grid points.
pub const DEFAULT_POINTS: usize = 4000;
/// Default bisection width for `lambda0`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Uniform grid `x_i = a + i h`, `i = 0..=n+1`, `h = (b - a)/(n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a < b) {
            return Err(invalid(alloc::format!("grid requires a < b, got ({a}, {b})")));
        }
        if n < 8 {
            return Err(invalid(alloc::format!("grid needs at least 8 interior points, got {n}")));
        }
        Ok(Grid1D { a, b, n })
    }

    /// Grid over the model's interval.
    pub fn for_model(model: &SdeModel, n: usize) -> Result<Self> {
        let (a, b) = model.require_1d()?;
        Self::new(a, b, n)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Interior point count.
    pub fn interior(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n as f64 + 1.0)
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n + 1 {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    /// All `n + 2` nodes, endpoints included.
    pub fn points(&self) -> Vec<f64> {
        (0..self.n + 2).map(|i| self.x(i)).collect()
    }
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// `gamma(x_i) = (2/sigma^2) int_a^{x_i} f` by cumulative trapezoid, with `gamma(a) = 0`.
pub fn compute_gamma(model: &SdeModel, grid: &Grid1D) -> Result<Vec<f64>> {
    model.require_1d()?;
    let scale = 2.0 / (model.sigma() * model.sigma());
    let h = grid.h();
    let f: Vec<f64> = grid.points().into_iter().map(|x| model.drift_1d(x)).collect();
    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation { point: vec![grid.x(i)], what: "drift" });
    }
    let mut gamma = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    gamma.push(0.0);
    for w in f.windows(2) {
        acc += scale * 0.5 * h * (w[0] + w[1]);
        gamma.push(acc);
    }
    Ok(gamma)
}

/// Symmetrized Dirichlet discretization of the generator on the interior nodes.
///
/// Flux coefficients `e^{gamma}` sit at cell midpoints; the midpoint value of
/// `gamma` is the trapezoid-consistent estimate
/// `(gamma_i + gamma_{i+1})/2 + (h / (4 sigma^2)) (f_i - f_{i+1})`.
/// Only differences of `gamma` enter, so the matrix is unchanged by adding a
/// constant to `gamma` and no exponential can overflow for bounded cell jumps.
pub fn assemble_generator(model: &SdeModel, grid: &Grid1D, gamma: &[f64]) -> Result<SymTridiag> {
    model.require_1d()?;
    let n = grid.interior();
    if gamma.len() != n + 2 {
        return Err(invalid(alloc::format!(
            "gamma has {} values, grid has {} nodes",
            gamma.len(),
            n + 2
        )));
    }
    let sigma2 = model.sigma() * model.sigma();
    let h = grid.h();
    let coef = 0.5 * sigma2 / (h * h);
    let f: Vec<f64> = grid.points().into_iter().map(|x| model.drift_1d(x)).collect();
    // gamma at midpoint j + 1/2, for j = 0..=n
    let mid: Vec<f64> = (0..=n)
        .map(|j| 0.5 * (gamma[j] + gamma[j + 1]) + h / (4.0 * sigma2) * (f[j] - f[j + 1]))
        .collect();
    let mut diag = Vec::with_capacity(n);
    for i in 1..=n {
        let right = (mid[i] - gamma[i]).exp();
        let left = (mid[i - 1] - gamma[i]).exp();
        diag.push(-coef * (right + left));
    }
    let off: Vec<f64> = (1..n)
        .map(|i| coef * (mid[i] - 0.5 * (gamma[i] + gamma[i + 1])).exp())
        .collect();
    if diag.iter().chain(&off).any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite generator entries".into()));
    }
    SymTridiag::new(diag, off)
}

/// Principal eigenpair of the symmetrized generator.
#[derive(Debug, Clone)]
pub struct RawEigenpair {
    pub lambda0: f64,
    /// Eigenvector in the symmetrized basis, `w_i = e^{gamma_i/2} psi_i`
    /// up to scale, interior nodes only.
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// Largest eigenvalue by Sturm bisection (bracket width `tol`) and its
/// eigenvector by inverse iteration. Fails if the eigenvector changes sign.
pub fn principal_eigenpair(matrix: &SymTridiag, tol: f64) -> Result<RawEigenpair> {
    if matrix.len() < 8 {
        return Err(invalid("principal_eigenpair needs n >= 8"));
    }
    let pair = linalg::principal_eigenpair(matrix, tol)?;
    let floor = 1e-12 * pair.vector.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if pair.vector.iter().any(|&v| v < -floor) {
        return Err(Error::Solver("principal eigenvector changes sign".into()));
    }
    Ok(RawEigenpair { lambda0: pair.value, vector: pair.vector, residual: pair.residual })
}

/// Grid functions derived from the principal eigenpair (endpoints included).
#[derive(Debug, Clone, PartialEq)]
pub struct Densities {
    pub psi: Vec<f64>,
    pub nu: Vec<f64>,
    pub eta: Vec<f64>,
    pub m: Vec<f64>,
}

/// Normalizes `psi` so that `int psi^2 e^gamma = 1` and `psi'(a) > 0`, then
/// forms `nu = psi e^gamma / int psi e^gamma`, `eta = (int psi dmu) psi` and
/// `m = psi^2 e^gamma`. Exponentials are taken of `gamma - max gamma`.
pub fn normalize_and_densities(gamma: &[f64], raw: &[f64], grid: &Grid1D) -> Result<Densities> {
    let n = grid.interior();
    if raw.len() != n || gamma.len() != n + 2 {
        return Err(invalid("eigenvector or gamma length does not match the grid"));
    }
    let h = grid.h();
    let sign = if raw[0] < 0.0 { -1.0 } else { 1.0 };
    let mut w = vec![0.0; n + 2];
    for (slot, v) in w[1..=n].iter_mut().zip(raw) {
        *slot = sign * v;
    }
    let w2: Vec<f64> = w.iter().map(|v| v * v).collect();
    let scale = 1.0 / trapezoid(&w2, h).sqrt();
    w.iter_mut().for_each(|v| *v *= scale);

    let top = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m: Vec<f64> = w.iter().map(|v| v * v).collect();
    let psi: Vec<f64> = w.iter().zip(gamma).map(|(v, g)| v * (-0.5 * g).exp()).collect();
    // psi e^{gamma - top} = w e^{gamma/2 - top}, shifted by e^{-top}
    let half_shift: Vec<f64> = gamma.iter().map(|g| (0.5 * (g - top)).exp()).collect();
    let phi: Vec<f64> = w.iter().zip(&half_shift).map(|(v, e)| v * e).collect();
    let mass = trapezoid(&phi, h);
    let nu: Vec<f64> = phi.iter().map(|p| p / mass).collect();
    let eta: Vec<f64> = w
        .iter()
        .zip(&half_shift)
        .map(|(v, e)| if *v == 0.0 { 0.0 } else { mass * v / e })
        .collect();
    Ok(Densities { psi, nu, eta, m })
}

/// Output of the full 1D pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    pub grid: Grid1D,
    pub x: Vec<f64>,
    pub gamma: Vec<f64>,
    pub psi: Vec<f64>,
    pub lambda0: f64,
    pub nu: Vec<f64>,
    pub eta: Vec<f64>,
    pub m: Vec<f64>,
    pub lambda: f64,
    pub residual: f64,
}

impl SpectralSolution {
    /// `int g dm` by trapezoid.
    pub fn integrate_against_m(&self, g: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.x.iter().zip(&self.m).map(|(x, m)| g(*x) * m).collect();
        trapezoid(&vals, self.grid.h())
    }

    /// `int g dnu` by trapezoid.
    pub fn integrate_against_nu(&self, g: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.x.iter().zip(&self.nu).map(|(x, m)| g(*x) * m).collect();
        trapezoid(&vals, self.grid.h())
    }

    /// Mass of a grid density in `[lo, hi]`, integrating its piecewise-linear
    /// interpolant exactly.
    pub fn mass_between(&self, density: &[f64], lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for (i, w) in self.x.windows(2).enumerate() {
            let (x0, x1) = (w[0], w[1]);
            let l = lo.max(x0);
            let r = hi.min(x1);
            if r <= l {
                continue;
            }
            let at = |x: f64| density[i] + (density[i + 1] - density[i]) * (x - x0) / (x1 - x0);
            total += 0.5 * (r - l) * (at(l) + at(r));
        }
        total
    }
}

/// `lambda = int f'(x) m(dx)` by trapezoid.
pub fn conditioned_lyapunov_1d(model: &SdeModel, x: &[f64], m: &[f64], h: f64) -> f64 {
    let vals: Vec<f64> = x.iter().zip(m).map(|(x, m)| model.derivative_1d(*x) * m).collect();
    trapezoid(&vals, h)
}

/// Runs the whole pipeline on `n` interior points with bisection width `tol`.
pub fn solve(model: &SdeModel, n: usize, tol: f64) -> Result<SpectralSolution> {
    let grid = Grid1D::for_model(model, n)?;
    let gamma = compute_gamma(model, &grid)?;
    solve_with_gamma(model, grid, gamma, tol)
}

/// Pipeline from a precomputed `gamma` (any additive constant).
pub fn solve_with_gamma(
    model: &SdeModel,
    grid: Grid1D,
    gamma: Vec<f64>,
    tol: f64,
) -> Result<SpectralSolution> {
    let matrix = assemble_generator(model, &grid, &gamma)?;
    let raw = principal_eigenpair(&matrix, tol)?;
    let dens = normalize_and_densities(&gamma, &raw.vector, &grid)?;
    let x = grid.points();
    let lambda = conditioned_lyapunov_1d(model, &x, &dens.m, grid.h());
    Ok(SpectralSolution {
        grid,
        x,
        gamma,
        psi: dens.psi,
        lambda0: raw.lambda0,
        nu: dens.nu,
        eta: dens.eta,
        m: dens.m,
        lambda,
        residual: raw.residual,
    })
}

/// The two integration-by-parts rewrites of `lambda`:
///
/// * `form_one = -(2/sigma^2) int f^2 dm - 2 int f psi' psi e^gamma`
/// * `form_two = -(2/sigma^2) int f^2 dm - 2 lambda0 + sigma^2 int psi'' psi e^gamma`
///
/// with `psi'`, `psi''` from central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub direct: f64,
    pub form_one: f64,
    pub form_two: f64,
    pub dev_one: f64,
    pub dev_two: f64,
}

impl IdentityReport {
    pub fn max_deviation(&self) -> f64 {
        self.dev_one.max(self.dev_two)
    }
}

pub fn identity_check(model: &SdeModel, sol: &SpectralSolution) -> IdentityReport {
    let h = sol.grid.h();
    let k = sol.x.len();
    let sigma2 = model.sigma() * model.sigma();
    let f: Vec<f64> = sol.x.iter().map(|x| model.drift_1d(*x)).collect();
    let psi = &sol.psi;
    // psi e^gamma = sqrt(m) e^{gamma/2}; psi vanishes at both ends so the
    // endpoint values of the integrands below are zero.
    let weight: Vec<f64> = psi.iter().zip(&sol.gamma).map(|(p, g)| p * g.exp()).collect();
    let mut d1 = vec![0.0; k];
    let mut d2 = vec![0.0; k];
    for i in 1..k - 1 {
        d1[i] = (psi[i + 1] - psi[i - 1]) / (2.0 * h);
        d2[i] = (psi[i + 1] - 2.0 * psi[i] + psi[i - 1]) / (h * h);
    }
    let f2m: Vec<f64> = f.iter().zip(&sol.m).map(|(f, m)| f * f * m).collect();
    let drift_term = -2.0 / sigma2 * trapezoid(&f2m, h);
    let cross: Vec<f64> = (0..k).map(|i| f[i] * d1[i] * weight[i]).collect();
    let curv: Vec<f64> = (0..k).map(|i| d2[i] * weight[i]).collect();
    let form_one = drift_term - 2.0 * trapezoid(&cross, h);
    let form_two = drift_term - 2.0 * sol.lambda0 + sigma2 * trapezoid(&curv, h);
    IdentityReport {
        direct: sol.lambda,
        form_one,
        form_two,
        dev_one: (form_one - sol.lambda).abs(),
        dev_two: (form_two - sol.lambda).abs(),
    }
}

/// `P_nu(T > t) = e^{lambda0 t}`.
pub fn survival_curve(sol: &SpectralSolution, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(alloc::format!("survival time must be >= 0, got {t}")));
    }
    Ok((sol.lambda0 * t).exp())
}
