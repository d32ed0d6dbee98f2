//! Conditioned Monte Carlo estimators and the statistical probes built on
//! the ensemble engine.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::ensemble::{
    run_ensemble, Binning, Checkpoint, EnsembleConfig, EnsembleRun, Mode, Observable, Tracking,
};
use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::model::{lambda_plus_minus, SdeModel};
use crate::sim::{self, FirstDeath, StepConfig};
use crate::spectral::SpectralSolution;
use crate::stats;

/// Rejection estimates from fewer survivors are flagged invalid.
pub const MIN_SURVIVORS: usize = 30;
/// Normal quantile for the Wilson intervals (95%).
pub const WILSON_Z: f64 = 1.96;

/// Conditional expectation estimate at horizon `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_survivors: usize,
    pub n_total: usize,
    pub t: f64,
    pub mode: Mode,
    /// False for rejection estimates with fewer than [`MIN_SURVIVORS`] survivors.
    pub valid: bool,
}

impl ConditionedEstimate {
    /// Mean over the checkpoint's particles with a mode-appropriate standard
    /// error: plain `sd / sqrt(n)` under rejection, spread of island means
    /// under Fleming-Viot.
    pub fn from_values(cp: &Checkpoint, run: &EnsembleRun, values: &[f64]) -> Self {
        let (value, naive_se) = stats::mean_and_se(values);
        let std_error = match run.mode {
            Mode::FlemingViot if run.groups > 1 => {
                let mut sums = vec![0.0; run.groups];
                let mut counts = vec![0usize; run.groups];
                let mut pivots = vec![f64::NAN; run.groups];
                for (s, v) in cp.samples.iter().zip(values) {
                    if pivots[s.group].is_nan() {
                        pivots[s.group] = *v;
                    }
                    sums[s.group] += v - pivots[s.group];
                    counts[s.group] += 1;
                }
                let means: Vec<f64> = (0..run.groups)
                    .filter(|g| counts[*g] > 0)
                    .map(|g| pivots[g] + sums[g] / counts[g] as f64)
                    .collect();
                stats::mean_and_se(&means).1
            }
            _ => naive_se,
        };
        let n_survivors = values.len();
        ConditionedEstimate {
            value,
            std_error,
            n_survivors,
            n_total: cp.n_total,
            t: cp.t,
            mode: run.mode,
            valid: run.mode == Mode::FlemingViot || n_survivors >= MIN_SURVIVORS,
        }
    }
}

fn require_survivors(cp: &Checkpoint) -> Result<()> {
    if cp.samples.is_empty() {
        Err(Error::Starvation { t: cp.t, n_total: cp.n_total })
    } else {
        Ok(())
    }
}

fn require_horizon(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(alloc::format!("horizon must be positive, got {t}")));
    }
    Ok(())
}

fn unit_vector(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}

/// `E_x[(1/t) int_0^t h(X_s) ds | T > t]`.
pub fn conditioned_expectation<E: Executor>(
    model: &SdeModel,
    h: Observable<'_>,
    x0: &[f64],
    t: f64,
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<ConditionedEstimate> {
    require_horizon(t)?;
    let track = Tracking { averages: vec![h], checkpoints: vec![t], ..Default::default() };
    let run = run_ensemble(model, x0, &track, cfg, exec)?;
    let cp = &run.checkpoints[0];
    require_survivors(cp)?;
    let values: Vec<f64> = cp.samples.iter().map(|s| s.averages[0]).collect();
    Ok(ConditionedEstimate::from_values(cp, &run, &values))
}

/// `E[lambda_v(t) | T > t]` with `lambda_v(t) = logr / t` from the polar tangent flow.
pub fn estimate_lambda_mc<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    v0: &[f64],
    t: f64,
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<ConditionedEstimate> {
    require_horizon(t)?;
    let track = Tracking { tangent: Some(v0.to_vec()), checkpoints: vec![t], ..Default::default() };
    let run = run_ensemble(model, x0, &track, cfg, exec)?;
    let cp = &run.checkpoints[0];
    require_survivors(cp)?;
    let values: Vec<f64> = cp.samples.iter().map(|s| s.ftle).collect();
    Ok(ConditionedEstimate::from_values(cp, &run, &values))
}

/// `int lambda^- dm <= lambda <= int lambda^+ dm`, all three from one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub lower: ConditionedEstimate,
    pub lambda: ConditionedEstimate,
    pub upper: ConditionedEstimate,
}

impl BoundsReport {
    /// Sandwich check with `k` standard errors of slack on each side.
    pub fn holds_within(&self, k: f64) -> bool {
        self.lower.value - k * self.lower.std_error <= self.lambda.value + k * self.lambda.std_error
            && self.lambda.value - k * self.lambda.std_error
                <= self.upper.value + k * self.upper.std_error
    }
}

pub fn bounds_check<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    v0: &[f64],
    t: f64,
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<BoundsReport> {
    require_horizon(t)?;
    let plus = |x: &[f64]| lambda_plus_minus(model, x).map_or(f64::NAN, |p| p.0);
    let minus = |x: &[f64]| lambda_plus_minus(model, x).map_or(f64::NAN, |p| p.1);
    let track = Tracking {
        tangent: Some(v0.to_vec()),
        averages: vec![&minus, &plus],
        checkpoints: vec![t],
        ..Default::default()
    };
    let run = run_ensemble(model, x0, &track, cfg, exec)?;
    let cp = &run.checkpoints[0];
    require_survivors(cp)?;
    let column = |k: usize| cp.samples.iter().map(|s| s.averages[k]).collect::<Vec<_>>();
    let ftle: Vec<f64> = cp.samples.iter().map(|s| s.ftle).collect();
    Ok(BoundsReport {
        lower: ConditionedEstimate::from_values(cp, &run, &column(0)),
        lambda: ConditionedEstimate::from_values(cp, &run, &ftle),
        upper: ConditionedEstimate::from_values(cp, &run, &column(1)),
    })
}

/// Least-squares slope of `ln P_x(T > t)` against `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    /// `(t, survivors, total)` per grid time, including unusable ones.
    pub points: Vec<(f64, usize, usize)>,
}

/// Fits the survival rate from rejection survivor counts. Times with no
/// survivors are skipped; fewer than four usable times is an error.
pub fn survival_rate_fit<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    t_grid: &[f64],
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<SurvivalFit> {
    let cfg = EnsembleConfig { mode: Mode::Rejection, ..cfg };
    let track = Tracking { checkpoints: t_grid.to_vec(), ..Default::default() };
    let run = run_ensemble(model, x0, &track, cfg, exec)?;
    let points: Vec<(f64, usize, usize)> =
        run.checkpoints.iter().map(|c| (c.t, c.n_survivors(), c.n_total)).collect();
    let usable: Vec<&(f64, usize, usize)> = points.iter().filter(|p| p.1 > 0).collect();
    if usable.len() < 4 {
        return Err(Error::Fit { usable: usable.len() });
    }
    let ts: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let logs: Vec<f64> = usable.iter().map(|p| (p.1 as f64 / p.2 as f64).ln()).collect();
    let fit = stats::fit_line(&ts, &logs).ok_or(Error::Fit { usable: usable.len() })?;
    Ok(SurvivalFit {
        slope: fit.slope,
        slope_se: fit.slope_se,
        intercept: fit.intercept,
        rms_residual: fit.rms_residual,
        points,
    })
}

/// Histogram bin with the matching reference mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
    pub reference: f64,
}

fn reference_bins(binning: &Binning, reference: &SpectralSolution, density: &[f64]) -> Vec<(f64, f64, f64)> {
    (0..binning.bins)
        .map(|k| {
            let (lo, hi) = binning.edges(k);
            (lo, hi, reference.mass_between(density, lo, hi))
        })
        .collect()
}

fn one_dimensional_binning(model: &SdeModel, bins: usize) -> Result<Binning> {
    let (a, b) = model.require_1d()?;
    Binning::new(a, b, bins)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsdReport {
    pub bins: Vec<HistogramBin>,
    /// `(1/2) sum |p_b - nu_b|`
    pub tv: f64,
    pub n_survivors: usize,
    pub n_total: usize,
}

/// Histogram of `X_t` over survivors against the spectral QSD `nu`.
pub fn empirical_qsd<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    t: f64,
    bins: usize,
    reference: &SpectralSolution,
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<QsdReport> {
    require_horizon(t)?;
    let binning = one_dimensional_binning(model, bins)?;
    let track = Tracking { checkpoints: vec![t], ..Default::default() };
    let run = run_ensemble(model, x0, &track, cfg, exec)?;
    let cp = &run.checkpoints[0];
    require_survivors(cp)?;
    let mut counts = vec![0usize; bins];
    for s in &cp.samples {
        counts[binning.index(s.x[0])] += 1;
    }
    let n = cp.samples.len() as f64;
    let bins: Vec<HistogramBin> = reference_bins(&binning, reference, &reference.nu)
        .into_iter()
        .zip(&counts)
        .map(|((lo, hi, r), c)| HistogramBin { lo, hi, mass: *c as f64 / n, reference: r })
        .collect();
    let tv = 0.5 * bins.iter().map(|b| (b.mass - b.reference).abs()).sum::<f64>();
    Ok(QsdReport { bins, tv, n_survivors: cp.samples.len(), n_total: cp.n_total })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QedReport {
    /// Occupation masses with the spectral QED `m` as reference.
    pub bins: Vec<HistogramBin>,
    /// `sum |p_b - m_b|`
    pub l1_m: f64,
    /// `sum |p_b - nu_b|`
    pub l1_nu: f64,
    /// `sum_b p_b f'(bin centre)` (1D Lyapunov exponent from the histogram).
    pub lambda_from_histogram: f64,
    /// Same run's `E[lambda_v(t) | T > t]`.
    pub lambda: ConditionedEstimate,
}

/// Time-occupation histogram of surviving paths against the spectral QED `m`.
pub fn empirical_qed<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    t: f64,
    bins: usize,
    reference: &SpectralSolution,
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<QedReport> {
    require_horizon(t)?;
    let binning = one_dimensional_binning(model, bins)?;
    let track = Tracking {
        tangent: Some(vec![1.0]),
        occupation: Some(binning),
        checkpoints: vec![t],
        ..Default::default()
    };
    let run = run_ensemble(model, x0, &track, cfg, exec)?;
    let cp = &run.checkpoints[0];
    require_survivors(cp)?;
    let mut mass = vec![0.0; bins];
    for s in &cp.samples {
        for (acc, v) in mass.iter_mut().zip(s.occupation.as_ref().expect("final checkpoint")) {
            *acc += v;
        }
    }
    let n = cp.samples.len() as f64;
    mass.iter_mut().for_each(|v| *v /= n);
    let nu_ref = reference_bins(&binning, reference, &reference.nu);
    let bins: Vec<HistogramBin> = reference_bins(&binning, reference, &reference.m)
        .into_iter()
        .zip(&mass)
        .map(|((lo, hi, r), p)| HistogramBin { lo, hi, mass: *p, reference: r })
        .collect();
    let l1_m = bins.iter().map(|b| (b.mass - b.reference).abs()).sum();
    let l1_nu = bins.iter().zip(&nu_ref).map(|(b, r)| (b.mass - r.2).abs()).sum();
    let lambda_from_histogram =
        bins.iter().map(|b| b.mass * model.derivative_1d(0.5 * (b.lo + b.hi))).sum();
    let ftle: Vec<f64> = cp.samples.iter().map(|s| s.ftle).collect();
    Ok(QedReport {
        bins,
        l1_m,
        l1_nu,
        lambda_from_histogram,
        lambda: ConditionedEstimate::from_values(cp, &run, &ftle),
    })
}

/// Conditional exceedance probability `P(|lambda_v(t) - lambda| >= eps | T > t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceedancePoint {
    pub t: f64,
    pub probability: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub n_survivors: usize,
    pub n_total: usize,
    /// Sample variance of `lambda_v(t)` over survivors.
    pub variance: f64,
    /// Chebyshev bound `mean((lambda_v - lambda)^2) / eps^2`.
    pub chebyshev_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCurve {
    pub points: Vec<ExceedancePoint>,
    /// True if later grid times were dropped for lack of survivors.
    pub truncated: bool,
}

pub fn convergence_probe<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    v0: &[f64],
    lambda: f64,
    eps: f64,
    t_grid: &[f64],
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<ConvergenceCurve> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let track = Tracking { tangent: Some(v0.to_vec()), checkpoints: t_grid.to_vec(), ..Default::default() };
    let run = run_ensemble(model, x0, &track, cfg, exec)?;
    let mut points = Vec::new();
    let mut truncated = false;
    for cp in &run.checkpoints {
        if cp.samples.is_empty() {
            truncated = true;
            break;
        }
        let ftle: Vec<f64> = cp.samples.iter().map(|s| s.ftle).collect();
        let n = ftle.len();
        let k = ftle.iter().filter(|v| (*v - lambda).abs() >= eps).count();
        let (lo, hi) = stats::wilson(k, n, WILSON_Z);
        let msd = ftle.iter().map(|v| (v - lambda) * (v - lambda)).sum::<f64>() / n as f64;
        points.push(ExceedancePoint {
            t: cp.t,
            probability: k as f64 / n as f64,
            wilson_lo: lo,
            wilson_hi: hi,
            n_survivors: n,
            n_total: cp.n_total,
            variance: stats::variance(&ftle),
            chebyshev_bound: msd / (eps * eps),
        });
    }
    if points.is_empty() {
        let t = run.checkpoints.first().map_or(0.0, |c| c.t);
        return Err(Error::Starvation { t, n_total: cfg.n_particles });
    }
    Ok(ConvergenceCurve { points, truncated })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPoint {
    pub t: f64,
    /// `E[h1(X_{qt}) h2(X_{rt}) | T > t]`
    pub estimate: ConditionedEstimate,
}

/// Conditional product moments `E_x[h1(X_{qt}) h2(X_{rt}) | T > t]` for
/// every `t` in `t_grid` (one ensemble run per `t`).
#[allow(clippy::too_many_arguments)]
pub fn correlation_probe<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    h1: Observable<'_>,
    h2: Observable<'_>,
    q: f64,
    r: f64,
    t_grid: &[f64],
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<Vec<CorrelationPoint>> {
    if !(0.0 < r && r < q && q < 1.0) {
        return Err(invalid(alloc::format!("need 0 < r < q < 1, got r = {r}, q = {q}")));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        require_horizon(t)?;
        let track = Tracking {
            snapshots: vec![(q * t, h1), (r * t, h2)],
            checkpoints: vec![t],
            ..Default::default()
        };
        let run = run_ensemble(model, x0, &track, cfg, exec)?;
        let cp = &run.checkpoints[0];
        require_survivors(cp)?;
        let values: Vec<f64> = cp.samples.iter().map(|s| s.snapshots[0] * s.snapshots[1]).collect();
        out.push(CorrelationPoint { t: cp.t, estimate: ConditionedEstimate::from_values(cp, &run, &values) });
    }
    Ok(out)
}

/// Extremal finite-time exponents over initial points, directions and paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumReport {
    pub sup: f64,
    pub inf: f64,
    /// Survivor mean of `lambda_v(t)` over all combinations.
    pub mean: f64,
    /// Largest survivor time average of `lambda^+` (upper envelope for `sup`).
    pub max_lambda_plus_average: f64,
    /// Smallest survivor time average of `lambda^-` (lower envelope for `inf`).
    pub min_lambda_minus_average: f64,
    pub n_samples: usize,
}

/// Empirical sup/inf of `lambda_v(t)` over survivors of every
/// `(x0, v0)` combination; a numerical probe, not a certified spectrum.
pub fn spectrum_probe<E: Executor>(
    model: &SdeModel,
    x0_grid: &[Vec<f64>],
    v_grid: &[Vec<f64>],
    t: f64,
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<SpectrumReport> {
    require_horizon(t)?;
    if x0_grid.is_empty() || v_grid.is_empty() {
        return Err(invalid("spectrum probe needs non-empty grids"));
    }
    let plus = |x: &[f64]| lambda_plus_minus(model, x).map_or(f64::NAN, |p| p.0);
    let minus = |x: &[f64]| lambda_plus_minus(model, x).map_or(f64::NAN, |p| p.1);
    let mut rep = SpectrumReport {
        sup: f64::NEG_INFINITY,
        inf: f64::INFINITY,
        mean: 0.0,
        max_lambda_plus_average: f64::NEG_INFINITY,
        min_lambda_minus_average: f64::INFINITY,
        n_samples: 0,
    };
    let mut total = 0.0;
    let mut combo = 0u64;
    for x0 in x0_grid {
        for v0 in v_grid {
            let track = Tracking {
                tangent: Some(v0.clone()),
                averages: vec![&plus, &minus],
                checkpoints: vec![t],
                ..Default::default()
            };
            // distinct streams per combination
            let sub = EnsembleConfig { seed: cfg.seed.wrapping_add(combo.wrapping_mul(0x9E37_79B9_7F4A_7C15)), ..cfg };
            combo += 1;
            let run = run_ensemble(model, x0, &track, sub, exec)?;
            for s in &run.checkpoints[0].samples {
                rep.sup = rep.sup.max(s.ftle);
                rep.inf = rep.inf.min(s.ftle);
                rep.max_lambda_plus_average = rep.max_lambda_plus_average.max(s.averages[0]);
                rep.min_lambda_minus_average = rep.min_lambda_minus_average.min(s.averages[1]);
                total += s.ftle;
                rep.n_samples += 1;
            }
        }
    }
    if rep.n_samples == 0 {
        return Err(Error::Starvation { t, n_total: cfg.n_particles * x0_grid.len() * v_grid.len() });
    }
    rep.mean = total / rep.n_samples as f64;
    Ok(rep)
}

/// Synchronization of pairs driven by common noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncReport {
    pub t: f64,
    /// `(1/t) ln |x_t - y_t|` for each pair alive at `t`, in pair order.
    pub rates: Vec<f64>,
    /// `(1/t) ln(|x_t - y_t| / |x_0 - y_0|)` for the same pairs.
    pub relative_rates: Vec<f64>,
    pub n_pairs: usize,
    /// Pairs in which `x` (resp. `y`) died first; simultaneous deaths count in both.
    pub x_died_first: usize,
    pub y_died_first: usize,
}

impl SyncReport {
    /// Fraction of surviving pairs whose rate is at most `threshold`.
    pub fn fraction_at_most(&self, threshold: f64) -> f64 {
        if self.rates.is_empty() {
            return f64::NAN;
        }
        self.rates.iter().filter(|r| **r <= threshold).count() as f64 / self.rates.len() as f64
    }
}

/// Runs `cfg.n_particles` independent pairs `(x0, y0)`, each pair sharing its noise.
pub fn sync_probe<E: Executor>(
    model: &SdeModel,
    x0: &[f64],
    y0: &[f64],
    t: f64,
    cfg: EnsembleConfig,
    exec: &E,
) -> Result<SyncReport> {
    require_horizon(t)?;
    let runs = exec.map(cfg.n_particles, |i| {
        let step = StepConfig::new(cfg.dt, cfg.seed, i as u64)?.with_killing(cfg.killing);
        sim::run_pair(model, x0, y0, step, t, &[t])
    });
    let mut rep = SyncReport { t, rates: Vec::new(), relative_rates: Vec::new(), n_pairs: cfg.n_particles, x_died_first: 0, y_died_first: 0 };
    for run in runs {
        let run = run?;
        match run.first_death {
            FirstDeath::X => rep.x_died_first += 1,
            FirstDeath::Y => rep.y_died_first += 1,
            FirstDeath::Both => {
                rep.x_died_first += 1;
                rep.y_died_first += 1;
            }
            FirstDeath::None => {}
        }
        if let Some(last) = run.samples.last() {
            rep.rates.push(last.rate);
            rep.relative_rates.push(last.relative_rate);
        }
    }
    if rep.rates.is_empty() {
        return Err(Error::Starvation { t, n_total: cfg.n_particles });
    }
    Ok(rep)
}

/// Default initial tangent `e_1`.
pub fn default_direction(model: &SdeModel) -> Vec<f64> {
    unit_vector(model.dim())
}
