use alloc::string::String;
use core::fmt;

/// Errors raised by model evaluation, the spectral solver and the simulators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Drift or Jacobian produced a non-finite value at the given point.
    Evaluation { point: alloc::vec::Vec<f64>, what: &'static str },
    /// Invalid argument or configuration.
    InvalidInput(String),
    /// Operation needs a one-dimensional model.
    NotOneDimensional { dim: usize },
    /// The eigen-solver failed to produce a principal eigenpair.
    Solver(String),
    /// A simulated path reached a non-finite state.
    Simulation { path_id: u64, step: u64 },
    /// No surviving paths were left for a rejection estimate.
    Starvation { t: f64, n_total: usize },
    /// Least-squares survival fit had fewer than four usable points.
    Fit { usable: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Evaluation { point, what } => {
                write!(f, "non-finite {what} at x = {point:?}")
            }
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NotOneDimensional { dim } => {
                write!(f, "operation requires a one-dimensional model, got d = {dim}")
            }
            Error::Solver(msg) => write!(f, "eigen-solver failure: {msg}"),
            Error::Simulation { path_id, step } => {
                write!(f, "non-finite state on path {path_id} at step {step}")
            }
            Error::Starvation { t, n_total } => {
                write!(f, "no surviving paths at t = {t} out of {n_total}")
            }
            Error::Fit { usable } => {
                write!(f, "survival fit needs at least 4 time points with survivors, got {usable}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
