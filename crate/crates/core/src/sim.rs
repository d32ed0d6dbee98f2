//! Euler-Maruyama paths with first-exit killing and the tangent flow in
//! polar coordinates.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::model::{Domain, SdeModel};
use crate::rng::NoiseStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Alive,
    /// Frozen since the first exit at time `at`.
    Killed { at: f64 },
}

/// Position, tangent direction `s` (unit vector), accumulated log-growth
/// `logr = ln(|Dphi v| / |v|)`, clock and survival status of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub logr: f64,
    pub t: f64,
    pub step: u64,
    pub status: Status,
}

impl PathState {
    /// Starts at `x0` with tangent direction `v0 / |v0|`.
    pub fn new(model: &SdeModel, x0: &[f64], v0: &[f64]) -> Result<Self> {
        let d = model.dim();
        if x0.len() != d || v0.len() != d {
            return Err(invalid(alloc::format!("x0 and v0 must have dimension {d}")));
        }
        if !model.domain().contains(x0) {
            return Err(invalid(alloc::format!("initial point {x0:?} is not inside the domain")));
        }
        let norm = v0.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("tangent vector v0 must be non-zero and finite"));
        }
        Ok(PathState {
            x: x0.to_vec(),
            s: v0.iter().map(|v| v / norm).collect(),
            logr: 0.0,
            t: 0.0,
            step: 0,
            status: Status::Alive,
        })
    }

    pub fn is_alive(&self) -> bool {
        self.status == Status::Alive
    }

    /// Finite-time Lyapunov exponent `logr / t` (zero at `t = 0`).
    pub fn ftle(&self) -> f64 {
        if self.t > 0.0 {
            self.logr / self.t
        } else {
            0.0
        }
    }
}

/// How boundary hits are detected within an Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KillingRule {
    /// Kill only when the step's end point leaves the domain.
    Segment,
    /// Additionally kill with the Brownian-bridge probability of an unseen
    /// excursion between two interior end points, `exp(-2 d0 d1 / (sigma^2 dt))`
    /// per boundary face (local half-space approximation for balls).
    #[default]
    Bridge,
}

/// Time step, killing rule and noise stream selection for a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub seed: u64,
    pub path_id: u64,
    pub killing: KillingRule,
}

impl StepConfig {
    pub fn new(dt: f64, seed: u64, path_id: u64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(alloc::format!("dt must be positive, got {dt}")));
        }
        Ok(StepConfig { dt, seed, path_id, killing: KillingRule::Bridge })
    }

    pub fn with_killing(mut self, killing: KillingRule) -> Self {
        self.killing = killing;
        self
    }

    pub fn stream(&self) -> NoiseStream {
        NoiseStream::new(self.seed, self.path_id)
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub drift: Vec<f64>,
    pub jac: Vec<f64>,
    pub dw: Vec<f64>,
    pub next: Vec<f64>,
    pub prev: Vec<f64>,
    pub js: Vec<f64>,
}

impl Workspace {
    pub fn new(d: usize) -> Self {
        Workspace {
            drift: vec![0.0; d],
            jac: vec![0.0; d * d],
            dw: vec![0.0; d],
            next: vec![0.0; d],
            prev: vec![0.0; d],
            js: vec![0.0; d],
        }
    }
}

/// Probability that a Brownian bridge with variance `sigma^2 dt` between two
/// interior points touches the boundary.
pub fn bridge_crossing_probability(domain: &Domain, from: &[f64], to: &[f64], sigma2_dt: f64) -> f64 {
    let face = |d0: f64, d1: f64| -> f64 {
        let e = 2.0 * d0 * d1 / sigma2_dt;
        if d0 <= 0.0 || d1 <= 0.0 {
            1.0
        } else if e > 40.0 {
            0.0
        } else {
            (-e).exp()
        }
    };
    match domain {
        Domain::Interval { a, b } => {
            let stay = (1.0 - face(from[0] - a, to[0] - a)) * (1.0 - face(b - from[0], b - to[0]));
            1.0 - stay
        }
        Domain::Box { lo, hi } => {
            let mut stay = 1.0;
            for i in 0..from.len() {
                stay *= 1.0 - face(from[i] - lo[i], to[i] - lo[i]);
                stay *= 1.0 - face(hi[i] - from[i], hi[i] - to[i]);
            }
            1.0 - stay
        }
        Domain::Ball { .. } => face(domain.boundary_distance(from), domain.boundary_distance(to)),
    }
}

/// Advances an alive path by one step: tangent update with `Df` at the
/// pre-step position (when `tangent`), then the Euler-Maruyama move with
/// fresh increments from `noise`, then the killing rule.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn step_path(
    model: &SdeModel,
    state: &mut PathState,
    noise: &mut NoiseStream,
    ws: &mut Workspace,
    dt: f64,
    sqrt_dt: f64,
    killing: KillingRule,
    tangent: bool,
) -> Result<()> {
    if tangent {
        model.jacobian_into(&state.x, &mut ws.jac);
        polar_update(state, &ws.jac, &mut ws.js, dt);
    }
    noise.increments(sqrt_dt, &mut ws.dw);
    if killing == KillingRule::Bridge {
        ws.prev.copy_from_slice(&state.x);
    }
    let dw = core::mem::take(&mut ws.dw);
    let res = em_step(model, state, &dw, dt, ws);
    ws.dw = dw;
    res?;
    if killing == KillingRule::Bridge && state.is_alive() {
        let sigma = model.sigma();
        let p = bridge_crossing_probability(model.domain(), &ws.prev, &state.x, sigma * sigma * dt);
        if p > 0.0 && noise.uniform() < p {
            model.domain().snap_to_boundary(&mut state.x);
            state.status = Status::Killed { at: state.t };
        }
    }
    Ok(())
}

/// One Euler-Maruyama step `x <- x + f(x) dt + sigma dW` followed by the
/// killing check. On exit the position is moved to the first crossing of the
/// step segment with the boundary and the path is frozen with `T = t + dt`.
pub fn em_step(
    model: &SdeModel,
    state: &mut PathState,
    dw: &[f64],
    dt: f64,
    ws: &mut Workspace,
) -> Result<()> {
    if !state.is_alive() {
        return Ok(());
    }
    let sigma = model.sigma();
    model.drift_into(&state.x, &mut ws.drift);
    for i in 0..state.x.len() {
        ws.next[i] = state.x[i] + ws.drift[i] * dt + sigma * dw[i];
    }
    if ws.next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Simulation { path_id: u64::MAX, step: state.step });
    }
    state.step += 1;
    state.t = state.step as f64 * dt;
    let domain = model.domain();
    if domain.contains(&ws.next) {
        state.x.copy_from_slice(&ws.next);
    } else {
        let theta = domain.exit_fraction(&state.x, &ws.next);
        for i in 0..state.x.len() {
            state.x[i] += theta * (ws.next[i] - state.x[i]);
        }
        domain.snap_to_boundary(&mut state.x);
        state.status = Status::Killed { at: state.t };
    }
    Ok(())
}

/// Explicit Euler step of the polar tangent dynamics for a given Jacobian
/// `jac = Df(x)` at the pre-step position:
/// `ds = (Df s - <s, Df s> s) dt` followed by renormalization, and
/// `logr += <s, Df s> dt`. Returns the rate `<s, Df s>`.
pub fn polar_update(state: &mut PathState, jac: &[f64], js: &mut [f64], dt: f64) -> f64 {
    let d = state.s.len();
    let s = &mut state.s;
    let mut rate = 0.0;
    for i in 0..d {
        let row = &jac[i * d..(i + 1) * d];
        let v: f64 = row.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
        js[i] = v;
        rate += s[i] * v;
    }
    if d > 1 {
        let mut norm2 = 0.0;
        for i in 0..d {
            s[i] += (js[i] - rate * s[i]) * dt;
            norm2 += s[i] * s[i];
        }
        let inv = 1.0 / norm2.sqrt();
        s.iter_mut().for_each(|v| *v *= inv);
    }
    state.logr += rate * dt;
    rate
}

/// Polar step using `Df` evaluated at the current position.
pub fn polar_step(model: &SdeModel, state: &mut PathState, dt: f64, ws: &mut Workspace) -> f64 {
    if !state.is_alive() {
        return 0.0;
    }
    model.jacobian_into(&state.x, &mut ws.jac);
    polar_update(state, &ws.jac, &mut ws.js, dt)
}

/// Converts checkpoint times to step indices (`round(t / dt)`, at least 1),
/// sorted and deduplicated.
pub fn checkpoint_steps(checkpoints: &[f64], dt: f64) -> Result<Vec<u64>> {
    let mut steps = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid(alloc::format!("checkpoint times must be positive, got {t}")));
        }
        steps.push(((t / dt).round() as u64).max(1));
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

/// Outcome of a single path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRun {
    pub final_state: PathState,
    /// `(t, logr / t)` at every checkpoint reached alive.
    pub ftle: Vec<(f64, f64)>,
}

/// Simulates one path with tangent flow up to `t_max` or killing.
pub fn run_path(
    model: &SdeModel,
    x0: &[f64],
    v0: &[f64],
    cfg: StepConfig,
    t_max: f64,
    checkpoints: &[f64],
) -> Result<PathRun> {
    run_path_traced(model, x0, v0, cfg, t_max, checkpoints, |_| {})
}

/// [`run_path`] with a callback invoked on the initial state and after every step.
pub fn run_path_traced(
    model: &SdeModel,
    x0: &[f64],
    v0: &[f64],
    cfg: StepConfig,
    t_max: f64,
    checkpoints: &[f64],
    mut observe: impl FnMut(&PathState),
) -> Result<PathRun> {
    let dt = cfg.dt;
    if checkpoints.iter().any(|&t| t > t_max * (1.0 + 1e-12)) {
        return Err(invalid("checkpoints must lie in (0, t_max]"));
    }
    let total = ((t_max / dt).round() as u64).max(1);
    let marks = checkpoint_steps(checkpoints, dt)?;
    let mut state = PathState::new(model, x0, v0)?;
    let mut ws = Workspace::new(model.dim());
    let mut noise = cfg.stream();
    let sqrt_dt = dt.sqrt();
    let mut ftle = Vec::with_capacity(marks.len());
    let mut next_mark = 0;
    observe(&state);
    while state.step < total && state.is_alive() {
        step_path(model, &mut state, &mut noise, &mut ws, dt, sqrt_dt, cfg.killing, true)
            .map_err(|_| Error::Simulation { path_id: cfg.path_id, step: state.step })?;
        observe(&state);
        while next_mark < marks.len() && marks[next_mark] <= state.step {
            if state.is_alive() && marks[next_mark] == state.step {
                ftle.push((state.t, state.ftle()));
            }
            next_mark += 1;
        }
    }
    Ok(PathRun { final_state: state, ftle })
}

/// Which member of a synchronized pair died first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstDeath {
    None,
    X,
    Y,
    Both,
}

/// Pair separation at a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSample {
    pub t: f64,
    /// `(1/t) ln |x_t - y_t|`; `-inf` when the paths coincide.
    pub rate: f64,
    /// `(1/t) ln(|x_t - y_t| / |x_0 - y_0|)`; `-inf` when the paths coincide.
    pub relative_rate: f64,
}

/// Two paths driven by identical noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRun {
    /// Samples at the checkpoints reached with both paths alive.
    pub samples: Vec<PairSample>,
    pub first_death: FirstDeath,
    pub death_time: Option<f64>,
}

/// Below this separation (relative to `1 + |x|`) the drift difference is
/// replaced by its linearization `Df(x) u` to avoid cancellation.
const LINEARIZE_BELOW: f64 = 1e-7;

/// Runs the pair `(x0, y0)` with common noise up to `t_max` or the first death.
///
/// `x` follows the Euler-Maruyama scheme. Common additive noise cancels in
/// the difference `y - x = r u`, which solves `d(r u) = (f(y) - f(x)) dt`;
/// it is advanced in polar form like the tangent flow
/// (`ln r += <u, g> dt`, `u += (g - <u, g> u) dt` with `g = (f(y) - f(x)) / r`),
/// and `y` is reconstructed as `x + r u`. The log-separation is exact for
/// linear drift and never underflows.
pub fn run_pair(
    model: &SdeModel,
    x0: &[f64],
    y0: &[f64],
    cfg: StepConfig,
    t_max: f64,
    checkpoints: &[f64],
) -> Result<PairRun> {
    let dt = cfg.dt;
    let d = model.dim();
    let total = ((t_max / dt).round() as u64).max(1);
    let marks = checkpoint_steps(checkpoints, dt)?;
    let diff: Vec<f64> = y0.iter().zip(x0).map(|(a, b)| a - b).collect();
    let r0 = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let coincide = r0 == 0.0;
    let u0 = if coincide { unit_vector(d) } else { diff.clone() };
    let mut xs = PathState::new(model, x0, &u0)?;
    let mut ys = PathState::new(model, y0, &u0)?;
    // separation lives in ys.s (direction) and ys.logr (log-radius)
    ys.logr = if coincide { f64::NEG_INFINITY } else { r0.ln() };
    let log_r0 = ys.logr;
    let mut ws = Workspace::new(d);
    let mut fy = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut dw = vec![0.0; d];
    let mut noise = cfg.stream();
    let sqrt_dt = dt.sqrt();
    let mut samples = Vec::with_capacity(marks.len());
    let mut next_mark = 0;
    let sigma2_dt = model.sigma() * model.sigma() * dt;
    let mut px = vec![0.0; d];
    let mut py = vec![0.0; d];
    let fail = |step| Error::Simulation { path_id: cfg.path_id, step };
    while xs.step < total && xs.is_alive() && ys.is_alive() {
        noise.increments(sqrt_dt, &mut dw);
        px.copy_from_slice(&xs.x);
        py.copy_from_slice(&ys.x);
        if !coincide {
            let r = ys.logr.exp();
            let rate = if r < LINEARIZE_BELOW * (1.0 + xs.x.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                model.jacobian_into(&xs.x, &mut ws.jac);
                for i in 0..d {
                    g[i] = (0..d).map(|j| ws.jac[i * d + j] * ys.s[j]).sum();
                }
                ys.s.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
            } else {
                model.drift_into(&xs.x, &mut ws.drift);
                model.drift_into(&ys.x, &mut fy);
                for i in 0..d {
                    g[i] = (fy[i] - ws.drift[i]) / r;
                }
                ys.s.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
            };
            if d > 1 {
                let mut norm2 = 0.0;
                for i in 0..d {
                    ys.s[i] += (g[i] - rate * ys.s[i]) * dt;
                    norm2 += ys.s[i] * ys.s[i];
                }
                let inv = 1.0 / norm2.sqrt();
                ys.s.iter_mut().for_each(|v| *v *= inv);
            }
            ys.logr += rate * dt;
        }
        em_step(model, &mut xs, &dw, dt, &mut ws).map_err(|_| fail(xs.step))?;
        ys.step = xs.step;
        ys.t = xs.t;
        let r = ys.logr.exp();
        for i in 0..d {
            ws.next[i] = xs.x[i] + r * ys.s[i];
        }
        if ws.next.iter().any(|v| !v.is_finite()) {
            return Err(fail(xs.step));
        }
        if model.domain().contains(&ws.next) {
            ys.x.copy_from_slice(&ws.next);
        } else {
            let theta = model.domain().exit_fraction(&py, &ws.next);
            for i in 0..d {
                ys.x[i] = py[i] + theta * (ws.next[i] - py[i]);
            }
            model.domain().snap_to_boundary(&mut ys.x);
            ys.status = Status::Killed { at: ys.t };
        }
        if cfg.killing == KillingRule::Bridge {
            // one uniform per step drives both bridges
            let u = noise.uniform();
            for (state, prev) in [(&mut xs, &px), (&mut ys, &py)] {
                if state.is_alive()
                    && u < bridge_crossing_probability(model.domain(), prev, &state.x, sigma2_dt)
                {
                    model.domain().snap_to_boundary(&mut state.x);
                    state.status = Status::Killed { at: state.t };
                }
            }
        }
        while next_mark < marks.len() && marks[next_mark] <= xs.step {
            if xs.is_alive() && ys.is_alive() && marks[next_mark] == xs.step {
                samples.push(PairSample {
                    t: xs.t,
                    rate: ys.logr / xs.t,
                    relative_rate: if coincide { f64::NEG_INFINITY } else { (ys.logr - log_r0) / xs.t },
                });
            }
            next_mark += 1;
        }
    }
    let (first_death, death_time) = match (xs.status, ys.status) {
        (Status::Alive, Status::Alive) => (FirstDeath::None, None),
        (Status::Killed { at }, Status::Alive) => (FirstDeath::X, Some(at)),
        (Status::Alive, Status::Killed { at }) => (FirstDeath::Y, Some(at)),
        (Status::Killed { at }, Status::Killed { .. }) => (FirstDeath::Both, Some(at)),
    };
    Ok(PairRun { samples, first_death, death_time })
}

fn unit_vector(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}
