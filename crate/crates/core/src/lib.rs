#![no_std]
#![cfg_attr(test, allow(unused_imports))]
//! Conditioned Lyapunov exponents of SDEs killed at the boundary of a
//! bounded domain.
//!
//! * [`model`], [`zoo`]: drift/Jacobian/noise/domain and the example models.
//! * [`spectral`]: the exact one-dimensional pipeline (survival rate,
//!   quasi-stationary and quasi-ergodic densities, `lambda = int f' dm`).
//! * [`sim`]: Euler-Maruyama paths with first-exit killing and the tangent
//!   flow in polar form.
//! * [`ensemble`], [`probes`]: conditioned Monte Carlo estimators (rejection
//!   and Fleming-Viot) and the statistical probes built on them.
//!
//! The crate only needs `alloc`. Parallel execution is injected through
//! [`exec::Executor`].

extern crate alloc;

pub mod ensemble;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod model;
pub mod probes;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod stats;
pub mod zoo;

pub use error::{Error, Result};
pub use model::{Domain, SdeModel};
