//! Ensembles of killed paths conditioned on survival.
//!
//! Two schemes realize the conditioning on `{T > t}`:
//!
//! * [`Mode::Rejection`]: independent paths; killed ones are discarded.
//!   Unbiased, but the survivor count decays like `e^{lambda0 t}`.
//! * [`Mode::FlemingViot`]: whenever a particle hits the boundary it is
//!   replaced by a copy of a uniformly chosen surviving particle (position,
//!   tangent direction, log-growth and every running accumulator), so the
//!   particle count stays constant. The ensemble is split into independent
//!   islands; resampling stays inside an island and standard errors come
//!   from the spread of island means, which accounts for the correlations
//!   that resampling induces between particles.
//!
//! Every particle owns the noise stream `(seed, particle id)`, and donor
//! choices are drawn from the killed particle's own stream, so results are
//! identical whatever executor runs the work.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::model::SdeModel;
use crate::rng::NoiseStream;
use crate::sim::{self, KillingRule, PathState, Status, Workspace};

/// Bounded observable `h: E -> R`.
pub type Observable<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rejection,
    FlemingViot,
}

/// Numerical settings shared by all ensemble estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub seed: u64,
    pub mode: Mode,
    pub killing: KillingRule,
    /// Fleming-Viot island count; `None` picks `clamp(n / 500, 2, 20)`.
    pub islands: Option<usize>,
}

impl EnsembleConfig {
    pub fn new(n_particles: usize, dt: f64, seed: u64, mode: Mode) -> Self {
        EnsembleConfig { n_particles, dt, seed, mode, killing: KillingRule::Bridge, islands: None }
    }

    pub fn with_killing(mut self, killing: KillingRule) -> Self {
        self.killing = killing;
        self
    }

    pub fn with_islands(mut self, islands: usize) -> Self {
        self.islands = Some(islands);
        self
    }

    pub fn island_count(&self) -> usize {
        match self.mode {
            Mode::Rejection => 1,
            Mode::FlemingViot => self
                .islands
                .unwrap_or_else(|| (self.n_particles / 500).clamp(2, 20))
                .clamp(1, self.n_particles.max(1)),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("ensemble needs at least one particle"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(alloc::format!("dt must be positive, got {}", self.dt)));
        }
        if self.mode == Mode::FlemingViot && self.n_particles / self.island_count() < 2 {
            return Err(invalid("Fleming-Viot islands need at least two particles each"));
        }
        Ok(())
    }
}

/// Uniform bins on `[lo, hi]` for one-dimensional occupation histograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || bins == 0 {
            return Err(invalid("binning needs lo < hi and at least one bin"));
        }
        Ok(Binning { lo, hi, bins })
    }

    #[inline]
    pub fn index(&self, x: f64) -> usize {
        let u = (x - self.lo) / (self.hi - self.lo) * self.bins as f64;
        if u <= 0.0 {
            0
        } else {
            (u as usize).min(self.bins - 1)
        }
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.bins as f64;
        (self.lo + k as f64 * w, if k + 1 == self.bins { self.hi } else { self.lo + (k + 1) as f64 * w })
    }
}

/// What each particle records along its path.
#[derive(Clone, Default)]
pub struct Tracking<'a> {
    /// Initial tangent vector; enables the polar tangent flow.
    pub tangent: Option<Vec<f64>>,
    /// Observables whose time averages `(1/t) int_0^t h(X_s) ds` are kept.
    pub averages: Vec<Observable<'a>>,
    /// `(time, observable)`: records `h(X_time)` once the clock reaches `time`.
    pub snapshots: Vec<(f64, Observable<'a>)>,
    /// One-dimensional occupation histogram of the whole path, reported at
    /// the final checkpoint.
    pub occupation: Option<Binning>,
    /// Times at which surviving particles are reported.
    pub checkpoints: Vec<f64>,
}

/// State of a surviving particle at a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    /// `logr / t`, or NaN without tangent tracking.
    pub ftle: f64,
    pub averages: Vec<f64>,
    /// NaN for snapshots whose time has not been reached.
    pub snapshots: Vec<f64>,
    /// Occupation fractions (summing to one); final checkpoint only.
    pub occupation: Option<Vec<f64>>,
    /// Island index (always 0 under rejection).
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    /// Survivors (rejection) or the whole population (Fleming-Viot).
    pub samples: Vec<Sample>,
    pub n_total: usize,
    /// Fleming-Viot resampling events so far.
    pub kills: u64,
}

impl Checkpoint {
    pub fn n_survivors(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub mode: Mode,
    pub groups: usize,
    pub checkpoints: Vec<Checkpoint>,
}

struct Particle {
    state: PathState,
    noise: NoiseStream,
    integrals: Vec<f64>,
    snaps: Vec<f64>,
    occ: Vec<f64>,
}

impl Particle {
    fn copy_from(&mut self, donor: &Particle) {
        self.state.x.copy_from_slice(&donor.state.x);
        self.state.s.copy_from_slice(&donor.state.s);
        self.state.logr = donor.state.logr;
        self.state.status = Status::Alive;
        self.integrals.copy_from_slice(&donor.integrals);
        self.snaps.copy_from_slice(&donor.snaps);
        self.occ.copy_from_slice(&donor.occ);
    }
}

struct Plan<'m, 'a> {
    model: &'m SdeModel,
    x0: &'m [f64],
    track: &'m Tracking<'a>,
    cfg: EnsembleConfig,
    total_steps: u64,
    marks: Vec<u64>,
    snap_steps: Vec<u64>,
    sqrt_dt: f64,
}

impl Plan<'_, '_> {
    fn spawn(&self, id: u64) -> Result<Particle> {
        let v0 = match &self.track.tangent {
            Some(v) => v.clone(),
            None => {
                let mut v = vec![0.0; self.model.dim()];
                v[0] = 1.0;
                v
            }
        };
        let state = PathState::new(self.model, self.x0, &v0)?;
        let mut p = Particle {
            state,
            noise: NoiseStream::new(self.cfg.seed, id),
            integrals: vec![0.0; self.track.averages.len()],
            snaps: vec![f64::NAN; self.track.snapshots.len()],
            occ: vec![0.0; self.track.occupation.map_or(0, |b| b.bins)],
        };
        self.record_snapshots(&mut p);
        Ok(p)
    }

    #[inline]
    fn record_snapshots(&self, p: &mut Particle) {
        for (j, &step) in self.snap_steps.iter().enumerate() {
            if step == p.state.step {
                p.snaps[j] = (self.track.snapshots[j].1)(&p.state.x);
            }
        }
    }

    /// Accumulates the left-point integrals at the current position, then steps.
    #[inline]
    fn advance(&self, p: &mut Particle, ws: &mut Workspace, id: u64) -> Result<()> {
        let dt = self.cfg.dt;
        for (acc, h) in p.integrals.iter_mut().zip(&self.track.averages) {
            *acc += h(&p.state.x) * dt;
        }
        if let Some(b) = self.track.occupation {
            p.occ[b.index(p.state.x[0])] += dt;
        }
        sim::step_path(
            self.model,
            &mut p.state,
            &mut p.noise,
            ws,
            dt,
            self.sqrt_dt,
            self.cfg.killing,
            self.track.tangent.is_some(),
        )
        .map_err(|_| Error::Simulation { path_id: id, step: p.state.step })?;
        if p.state.is_alive() {
            self.record_snapshots(p);
        }
        Ok(())
    }

    fn sample(&self, p: &Particle, group: usize, is_final: bool) -> Sample {
        let t = p.state.t;
        Sample {
            x: p.state.x.clone(),
            ftle: if self.track.tangent.is_some() { p.state.logr / t } else { f64::NAN },
            averages: p.integrals.iter().map(|v| v / t).collect(),
            snapshots: p.snaps.clone(),
            occupation: if is_final && self.track.occupation.is_some() {
                Some(p.occ.iter().map(|v| v / t).collect())
            } else {
                None
            },
            group,
        }
    }

    /// Runs one rejection path, returning its sample at every checkpoint it survives.
    fn rejection_path(&self, id: u64) -> Result<Vec<Option<Sample>>> {
        let mut p = self.spawn(id)?;
        let mut ws = Workspace::new(self.model.dim());
        let mut out: Vec<Option<Sample>> = vec![None; self.marks.len()];
        let last = self.marks.len() - 1;
        let mut next = 0;
        while p.state.step < self.total_steps && p.state.is_alive() {
            self.advance(&mut p, &mut ws, id)?;
            if !p.state.is_alive() {
                break;
            }
            while next < self.marks.len() && self.marks[next] == p.state.step {
                out[next] = Some(self.sample(&p, 0, next == last));
                next += 1;
            }
        }
        Ok(out)
    }

    /// Runs one Fleming-Viot island of particles `first..first + size`.
    fn island(&self, group: usize, first: u64, size: usize) -> Result<Vec<Checkpoint>> {
        let mut particles = (0..size as u64)
            .map(|k| self.spawn(first + k))
            .collect::<Result<Vec<_>>>()?;
        let mut ws = Workspace::new(self.model.dim());
        let mut killed: Vec<usize> = Vec::new();
        let mut alive: Vec<usize> = Vec::with_capacity(size);
        let mut kills = 0u64;
        let mut out = Vec::with_capacity(self.marks.len());
        let last = self.marks.len() - 1;
        let mut next = 0;
        for _ in 0..self.total_steps {
            killed.clear();
            alive.clear();
            for (k, p) in particles.iter_mut().enumerate() {
                self.advance(p, &mut ws, first + k as u64)?;
                if p.state.is_alive() {
                    alive.push(k);
                } else {
                    killed.push(k);
                }
            }
            if alive.is_empty() {
                let t = particles[0].state.t;
                return Err(Error::Starvation { t, n_total: size });
            }
            for &k in &killed {
                let pick = particles[k].noise.index(alive.len());
                let donor = alive[pick];
                let (dst, src) = pair_mut(&mut particles, k, donor);
                dst.copy_from(src);
                self.record_snapshots(dst);
                kills += 1;
            }
            let step = particles[0].state.step;
            while next < self.marks.len() && self.marks[next] == step {
                let t = particles[0].state.t;
                let samples = particles.iter().map(|p| self.sample(p, group, next == last)).collect();
                out.push(Checkpoint { t, samples, n_total: size, kills });
                next += 1;
            }
        }
        Ok(out)
    }
}

fn pair_mut<T>(v: &mut [T], dst: usize, src: usize) -> (&mut T, &T) {
    debug_assert_ne!(dst, src);
    if dst < src {
        let (a, b) = v.split_at_mut(src);
        (&mut a[dst], &b[0])
    } else {
        let (a, b) = v.split_at_mut(dst);
        (&mut b[0], &a[src])
    }
}

/// Simulates `cfg.n_particles` particles from `x0` up to the last checkpoint.
///
/// Rejection checkpoints list survivors in path-id order; Fleming-Viot
/// checkpoints list the whole population island by island.
pub fn run_ensemble<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    track: &Tracking<'_>,
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<EnsembleRun> {
    cfg.validate()?;
    if x0.len() != model.dim() || !model.domain().contains(x0) {
        return Err(invalid(alloc::format!("initial point {x0:?} is not inside the domain")));
    }
    if track.checkpoints.is_empty() {
        return Err(invalid("at least one checkpoint time is required"));
    }
    let marks = sim::checkpoint_steps(&track.checkpoints, cfg.dt)?;
    let total_steps = *marks.last().expect("non-empty");
    let snap_steps: Vec<u64> = track
        .snapshots
        .iter()
        .map(|(t, _)| {
            if *t >= 0.0 {
                Ok((t / cfg.dt).round() as u64)
            } else {
                Err(invalid("snapshot times must be non-negative"))
            }
        })
        .collect::<Result<_>>()?;
    let plan = Plan {
        model,
        x0,
        track,
        cfg,
        total_steps,
        marks: marks.clone(),
        snap_steps,
        sqrt_dt: cfg.dt.sqrt(),
    };
    let times: Vec<f64> = marks.iter().map(|&m| m as f64 * cfg.dt).collect();

    match cfg.mode {
        Mode::Rejection => {
            let n = cfg.n_particles;
            let paths = exec.map(n, |i| plan.rejection_path(i as u64));
            let mut checkpoints: Vec<Checkpoint> = times
                .iter()
                .map(|&t| Checkpoint { t, samples: Vec::new(), n_total: n, kills: 0 })
                .collect();
            for path in paths {
                for (cp, sample) in checkpoints.iter_mut().zip(path?) {
                    if let Some(s) = sample {
                        cp.samples.push(s);
                    }
                }
            }
            Ok(EnsembleRun { mode: cfg.mode, groups: 1, checkpoints })
        }
        Mode::FlemingViot => {
            let k = cfg.island_count();
            let n = cfg.n_particles;
            let sizes: Vec<usize> = (0..k).map(|g| n / k + usize::from(g < n % k)).collect();
            let firsts: Vec<u64> = sizes
                .iter()
                .scan(0u64, |acc, s| {
                    let f = *acc;
                    *acc += *s as u64;
                    Some(f)
                })
                .collect();
            let islands = exec.map(k, |g| plan.island(g, firsts[g], sizes[g]));
            let mut checkpoints: Vec<Checkpoint> = times
                .iter()
                .map(|&t| Checkpoint { t, samples: Vec::with_capacity(n), n_total: n, kills: 0 })
                .collect();
            for island in islands {
                for (cp, part) in checkpoints.iter_mut().zip(island?) {
                    cp.samples.extend(part.samples);
                    cp.kills += part.kills;
                }
            }
            Ok(EnsembleRun { mode: cfg.mode, groups: k, checkpoints })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::zoo::{self, Params};

    fn pitchfork(c: f64) -> SdeModel {
        zoo::build("pitchfork", &Params::new().with("c", c), 1.0, None).unwrap().model
    }

    #[test]
    fn fleming_viot_keeps_every_particle_inside() {
        let model = pitchfork(0.5);
        let track = Tracking { checkpoints: vec![0.5, 1.0, 2.0], ..Default::default() };
        let cfg = EnsembleConfig::new(200, 1e-2, 3, Mode::FlemingViot);
        let run = run_ensemble(&model, &[0.0], &track, cfg, &Serial).unwrap();
        for cp in &run.checkpoints {
            assert_eq!(cp.samples.len(), 200);
            assert!(cp.samples.iter().all(|s| model.domain().contains(&s.x)));
        }
        assert!(run.checkpoints[2].kills > run.checkpoints[0].kills);
    }

    #[test]
    fn rejection_counts_decrease() {
        let model = pitchfork(0.5);
        let track = Tracking { checkpoints: vec![0.1, 0.5, 1.0], ..Default::default() };
        let cfg = EnsembleConfig::new(300, 1e-2, 3, Mode::Rejection);
        let run = run_ensemble(&model, &[0.0], &track, cfg, &Serial).unwrap();
        let counts: Vec<usize> = run.checkpoints.iter().map(|c| c.n_survivors()).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
        assert!(run.checkpoints.iter().all(|c| c.n_total == 300));
    }

    #[test]
    fn kill_rate_estimates_survival_rate() {
        // Each kill is one resampling event, so kills / (N t) tracks -lambda0.
        let model = pitchfork(0.3);
        let sol = crate::spectral::solve(&model, 2000, 1e-10).unwrap();
        let track = Tracking { checkpoints: vec![0.5, 1.5], ..Default::default() };
        let cfg = EnsembleConfig::new(100, 1e-4, 9, Mode::FlemingViot).with_islands(1);
        let run = run_ensemble(&model, &[0.0], &track, cfg, &Serial).unwrap();
        let rate = (run.checkpoints[1].kills - run.checkpoints[0].kills) as f64 / (100.0 * 1.0);
        assert!((rate + sol.lambda0).abs() < 0.15 * sol.lambda0.abs(), "{rate} vs {}", sol.lambda0);
    }

    #[test]
    fn binning_edges() {
        let b = Binning::new(0.0, 1.0, 4).unwrap();
        assert_eq!(b.index(-0.1), 0);
        assert_eq!(b.index(0.3), 1);
        assert_eq!(b.index(1.0), 3);
        assert_eq!(b.edges(3), (0.75, 1.0));
    }
}
