//! Named example models with their parameters.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::model::{Domain, DriftField, Scalar, ScalarDrift, SdeModel};

/// Polynomial drift `f(x) = sum_k c_k x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl ScalarDrift for Polynomial {
    fn value(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }
}

/// Gradient drift `f = -grad V` with `V(x) = (|x|^2 - 1)^2 / 4`, i.e.
/// `f(x) = (1 - |x|^2) x`.
#[derive(Debug, Clone, Copy)]
pub struct RingGradient {
    pub dim: usize,
}

impl DriftField for RingGradient {
    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        for (o, v) in out.iter_mut().zip(x) {
            *o = (1.0 - r2) * v;
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        for i in 0..d {
            for j in 0..d {
                let diag = if i == j { 1.0 - r2 } else { 0.0 };
                out[i * d + j] = diag - 2.0 * x[i] * x[j];
            }
        }
    }
}

/// Constant-matrix drift `f(x) = A x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub dim: usize,
    pub matrix: Vec<f64>,
}

impl DriftField for Linear {
    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            out[i] = (0..d).map(|j| self.matrix[i * d + j] * x[j]).sum();
        }
    }

    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.matrix);
    }
}

/// Named real parameters, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(Vec<(String, f64)>);

impl Params {
    pub fn new() -> Self {
        Params(Vec::new())
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: f64) {
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Model zoo names. `pitchfork`, `quintic` and `septic` are the local
/// bifurcation examples; the rest are controls with known answers.
pub const ZOO_NAMES: &[&str] =
    &["brownian", "ou", "pitchfork", "quintic", "septic", "ring2d", "linear2d"];

/// Parameters each zoo entry reads (other keys are ignored).
pub fn parameter_names(name: &str) -> &'static [&'static str] {
    match name {
        "ou" => &["kappa"],
        "pitchfork" | "quintic" | "septic" => &["alpha", "c"],
        "ring2d" => &["radius"],
        "linear2d" => &["a", "b", "omega", "radius"],
        _ => &[],
    }
}

#[derive(Debug)]
pub struct ZooEntry {
    pub name: String,
    pub model: SdeModel,
    pub params: Params,
}

/// Builds a zoo model. `domain` overrides the entry's default domain.
///
/// Defaults: `brownian` on `(0, pi)`; `ou` on `(-1, 1)`; the polynomial
/// pitchfork family on `(-c, c)` with `c = 1` (`1.5` for `quintic` and
/// `septic`); `ring2d` on the ball of radius `1.5`; `linear2d`
/// (`A = [[a, -omega], [omega, b]]`) on the unit ball.
pub fn build(name: &str, params: &Params, sigma: f64, domain: Option<Domain>) -> Result<ZooEntry> {
    let alpha = params.get_or("alpha", 1.0);
    let (field, default_domain): (alloc::boxed::Box<dyn DriftField>, Domain) = match name {
        "brownian" => (
            alloc::boxed::Box::new(Scalar(Polynomial { coeffs: vec![] })),
            Domain::interval(0.0, PI)?,
        ),
        "ou" => (
            alloc::boxed::Box::new(Scalar(Polynomial {
                coeffs: vec![0.0, -params.get_or("kappa", 1.0)],
            })),
            Domain::symmetric(1.0)?,
        ),
        "pitchfork" => (
            alloc::boxed::Box::new(Scalar(Polynomial { coeffs: vec![0.0, alpha, 0.0, -1.0] })),
            Domain::symmetric(params.get_or("c", 1.0))?,
        ),
        "quintic" => (
            alloc::boxed::Box::new(Scalar(Polynomial {
                coeffs: vec![0.0, alpha, 0.0, -1.0, 0.0, 0.3],
            })),
            Domain::symmetric(params.get_or("c", 1.5))?,
        ),
        "septic" => (
            alloc::boxed::Box::new(Scalar(Polynomial {
                coeffs: vec![0.0, alpha, 0.0, -1.0, 0.0, 0.3, 0.0, -0.1],
            })),
            Domain::symmetric(params.get_or("c", 1.5))?,
        ),
        "ring2d" => (
            alloc::boxed::Box::new(RingGradient { dim: 2 }),
            Domain::ball(vec![0.0, 0.0], params.get_or("radius", 1.5))?,
        ),
        "linear2d" => {
            let a = params.get_or("a", 0.0);
            let b = params.get_or("b", 0.0);
            let w = params.get_or("omega", 0.0);
            (
                alloc::boxed::Box::new(Linear { dim: 2, matrix: vec![a, -w, w, b] }),
                Domain::ball(vec![0.0, 0.0], params.get_or("radius", 1.0))?,
            )
        }
        other => {
            return Err(invalid(alloc::format!(
                "unknown model '{other}', expected one of {ZOO_NAMES:?}"
            )))
        }
    };
    let model = SdeModel::from_boxed(field, sigma, domain.unwrap_or(default_domain))?;
    Ok(ZooEntry { name: name.to_string(), model, params: params.clone() })
}
