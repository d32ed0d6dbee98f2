//! Named observables `h(x)` selectable from the command line.
//!
//! `one`, `x` (first coordinate), `x1`, `x2`, ... (coordinates), `r`
//! (Euclidean norm), `fprime` (`f'` of a 1D model), `lambda_plus` and
//! `lambda_minus` (extremes of the symmetrized Jacobian).

use qlyap_core::model::lambda_plus_minus;
use qlyap_core::SdeModel;

use crate::error::{CliError, CliResult};

pub type BoxedObservable<'a> = Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>;

pub fn observable<'a>(name: &str, model: &'a SdeModel) -> CliResult<BoxedObservable<'a>> {
    let d = model.dim();
    let obs: BoxedObservable<'a> = match name {
        "one" => Box::new(|_| 1.0),
        "x" => Box::new(|x| x[0]),
        "r" => Box::new(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()),
        "fprime" => {
            if d != 1 {
                return Err(CliError::usage("observable fprime needs a one-dimensional model"));
            }
            Box::new(move |x| model.derivative_1d(x[0]))
        }
        "lambda_plus" => Box::new(move |x| lambda_plus_minus(model, x).map_or(f64::NAN, |p| p.0)),
        "lambda_minus" => Box::new(move |x| lambda_plus_minus(model, x).map_or(f64::NAN, |p| p.1)),
        coord if coord.starts_with('x') => {
            let i: usize = coord[1..]
                .parse()
                .ok()
                .filter(|i| (1..=d).contains(i))
                .ok_or_else(|| CliError::usage(format!("observable '{coord}' is not a coordinate of a {d}-dimensional model")))?;
            Box::new(move |x| x[i - 1])
        }
        other => return Err(CliError::usage(format!("unknown observable '{other}'"))),
    };
    Ok(obs)
}

/// Closed-form reference `int h dm` for 1D models from a spectral solution.
pub fn reference_1d(name: &str, model: &SdeModel, sol: &qlyap_core::spectral::SpectralSolution) -> CliResult<f64> {
    let h = observable(name, model)?;
    Ok(sol.integrate_against_m(|x| h(&[x])))
}
