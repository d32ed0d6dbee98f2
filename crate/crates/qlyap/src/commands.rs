//! Subcommand implementations. Each returns the summary lines, the CSV table
//! and optional SVG; writing them out is left to the caller.

use qlyap_core::ensemble::{EnsembleConfig, Mode};
use qlyap_core::exec::Executor;
use qlyap_core::model::Domain;
use qlyap_core::probes::{self, ConditionedEstimate};
use qlyap_core::sim::{self, Status, StepConfig};
use qlyap_core::spectral::{self, SpectralSolution, DEFAULT_TOL};
use qlyap_core::{Error as CoreError, SdeModel};

use crate::config::{ModeChoice, RunConfig, SweepSpec};
use crate::csv::{num, Table};
use crate::error::{CliError, CliResult};
use crate::observables::{observable, reference_1d};
use crate::svg::{LinePlot, Series};

/// Grid size used when `mode=auto` needs a quick survival-rate estimate.
const AUTO_MODE_POINTS: usize = 1000;
/// Sign changes are bracketed to this width in the swept parameter.
pub const SIGN_CHANGE_TOL: f64 = 1e-3;

#[derive(Debug, Default)]
pub struct Output {
    pub lines: Vec<String>,
    pub table: Option<Table>,
    pub svg: Option<String>,
    /// Error to report after the outputs are written (partial sweeps).
    pub deferred: Option<CliError>,
}

impl Output {
    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn require_1d(model: &SdeModel, what: &str) -> CliResult<()> {
    if model.dim() != 1 {
        return Err(CliError::usage(format!("{what} needs a one-dimensional model, got dimension {}", model.dim())));
    }
    Ok(())
}

/// Spectral solve; a drift that cannot be tabulated on the grid counts as a
/// solver failure rather than a runtime error.
fn solve(model: &SdeModel, n: usize) -> CliResult<SpectralSolution> {
    spectral::solve(model, n, DEFAULT_TOL).map_err(|e| match e {
        CoreError::Evaluation { .. } => CliError::Solver(e.to_string()),
        e => e.into(),
    })
}

/// Center of the domain.
pub fn default_start(domain: &Domain) -> Vec<f64> {
    match domain {
        Domain::Interval { a, b } => vec![0.5 * (a + b)],
        Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        Domain::Ball { center, .. } => center.clone(),
    }
}

fn start(cfg: &RunConfig, model: &SdeModel) -> Vec<f64> {
    cfg.x0.clone().unwrap_or_else(|| default_start(model.domain()))
}

fn direction(cfg: &RunConfig, model: &SdeModel) -> Vec<f64> {
    cfg.v0.clone().unwrap_or_else(|| probes::default_direction(model))
}

/// Rejection for `t <= 5 / |lambda0|`, Fleming-Viot beyond (and in d >= 2).
pub fn resolve_mode(cfg: &RunConfig, model: &SdeModel) -> CliResult<Mode> {
    match cfg.mode {
        ModeChoice::Fixed(m) => Ok(m),
        ModeChoice::Auto if model.dim() == 1 => {
            let l0 = solve(model, AUTO_MODE_POINTS)?.lambda0;
            Ok(if cfg.t * l0.abs() <= 5.0 { Mode::Rejection } else { Mode::FlemingViot })
        }
        ModeChoice::Auto => Ok(Mode::FlemingViot),
    }
}

pub fn ensemble_config(cfg: &RunConfig, model: &SdeModel) -> CliResult<EnsembleConfig> {
    let mut e = EnsembleConfig::new(cfg.particles, cfg.dt, cfg.seed, resolve_mode(cfg, model)?).with_killing(cfg.killing);
    if let Some(k) = cfg.islands {
        e = e.with_islands(k);
    }
    Ok(e)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Rejection => "rejection",
        Mode::FlemingViot => "fv",
    }
}

fn estimate_row(e: &ConditionedEstimate) -> Vec<String> {
    vec![num(e.t), num(e.value), num(e.std_error), e.n_survivors.to_string(), e.n_total.to_string()]
}

const ESTIMATE_COLUMNS: &[&str] = &["t", "estimate", "std_error", "n_survivors", "n_total"];

fn estimate_line(e: &ConditionedEstimate) -> String {
    let mut s = format!(
        "estimate={} std_error={} n_survivors={} n_total={} t={} mode={}",
        num(e.value),
        num(e.std_error),
        e.n_survivors,
        e.n_total,
        num(e.t),
        mode_name(e.mode)
    );
    if !e.valid {
        s.push_str(" (flagged: fewer than 30 survivors)");
    }
    s
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn spectral_cmd(cfg: &RunConfig) -> CliResult<Output> {
    let model = cfg.build_model()?;
    require_1d(&model, "spectral")?;
    let sol = solve(&model, cfg.n)?;
    let id = spectral::identity_check(&model, &sol);
    let mut out = Output::default();
    let mut table = Table::new("spectral", cfg, &["x", "gamma", "psi", "nu", "eta", "m"]);
    table.note(format!("lambda0={}, lambda={}", num(sol.lambda0), num(sol.lambda)));
    table.note(format!("identity_dev={} residual={}", num(id.max_deviation()), num(sol.residual)));
    for i in 0..sol.x.len() {
        table.push(vec![num(sol.x[i]), num(sol.gamma[i]), num(sol.psi[i]), num(sol.nu[i]), num(sol.eta[i]), num(sol.m[i])]);
    }
    out.table = Some(table);
    out.line(format!("lambda0={} lambda={} identity_dev={}", num(sol.lambda0), num(sol.lambda), num(id.max_deviation())));
    Ok(out)
}

/// One sweep point: `(lambda0, lambda)` or the failure message.
pub type SweepPoint = Result<(f64, f64), String>;

fn sweep_point(spec: &SweepSpec, value: f64) -> CliResult<(f64, f64)> {
    let model = spec.template.with_value(&spec.param, value)?.build_model()?;
    require_1d(&model, "sweep")?;
    let sol = solve(&model, spec.template.n)?;
    Ok((sol.lambda0, sol.lambda))
}

/// Bisects `lambda(param)` on a bracket with a sign change down to `tol`.
pub fn bisect_sign_change(spec: &SweepSpec, mut lo: f64, mut hi: f64, tol: f64) -> CliResult<(f64, f64)> {
    let mut f_lo = sweep_point(spec, lo)?.1;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = sweep_point(spec, mid)?.1;
        if f_mid == 0.0 {
            return Ok((mid, mid));
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub values: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// `(estimate, bracket_lo, bracket_hi)` per sign change of `lambda`.
    pub sign_changes: Vec<(f64, f64, f64)>,
}

pub fn run_sweep<E: Executor>(spec: &SweepSpec, exec: &E) -> CliResult<SweepResult> {
    let points: Vec<SweepPoint> =
        exec.map(spec.values.len(), |i| sweep_point(spec, spec.values[i]).map_err(|e| e.to_string()));
    let mut sign_changes = Vec::new();
    for i in 0..points.len().saturating_sub(1) {
        let (Ok((_, a)), Ok((_, b))) = (&points[i], &points[i + 1]) else { continue };
        let (va, vb) = (spec.values[i], spec.values[i + 1]);
        if *a == 0.0 {
            sign_changes.push((va, va, va));
        } else if *b != 0.0 && (*a > 0.0) != (*b > 0.0) {
            let (lo, hi) = bisect_sign_change(spec, va, vb, SIGN_CHANGE_TOL)?;
            sign_changes.push((0.5 * (lo + hi), lo, hi));
        }
    }
    Ok(SweepResult { values: spec.values.clone(), points, sign_changes })
}

pub fn sweep_cmd<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let spec = SweepSpec::from_config(cfg)?;
    let res = run_sweep(&spec, exec)?;
    let mut out = Output::default();
    let mut table = Table::new("sweep", cfg, &[spec.param.as_str(), "lambda0", "lambda", "status"]);
    for (v, lo, hi) in &res.sign_changes {
        table.note(format!("sign_change={} bracket=[{},{}]", num(*v), num(*lo), num(*hi)));
    }
    let mut failed = 0;
    for (v, p) in res.values.iter().zip(&res.points) {
        match p {
            Ok((l0, l)) => table.push(vec![num(*v), num(*l0), num(*l), "ok".into()]),
            Err(msg) => {
                failed += 1;
                out.line(format!("{}={}: failed: {msg}", spec.param, num(*v)));
                table.push(vec![num(*v), "NaN".into(), "NaN".into(), "failed".into()]);
            }
        }
    }
    out.line(format!("points={} failed={} sign_changes={}", res.values.len(), failed, res.sign_changes.len()));
    for (v, lo, hi) in &res.sign_changes {
        out.line(format!("sign_change {}={} bracket=[{},{}]", spec.param, num(*v), num(*lo), num(*hi)));
    }
    if cfg.svg.is_some() {
        let pts = res.values.iter().zip(&res.points).map(|(v, p)| (*v, p.as_ref().map_or(f64::NAN, |x| x.1))).collect();
        let plot = LinePlot {
            title: format!("lambda({}) for {}", spec.param, cfg.model),
            x_label: spec.param.clone(),
            y_label: "lambda".into(),
            series: vec![Series { label: "conditioned Lyapunov exponent".into(), points: pts }],
        };
        out.svg = Some(plot.render());
    }
    out.table = Some(table);
    if failed > 0 {
        out.deferred = Some(CliError::PartialSweep { failed, total: res.values.len() });
    }
    Ok(out)
}

pub fn estimate_cmd<E: Executor>(kind: &str, cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let x0 = start(cfg, &model);
    let ens = ensemble_config(cfg, &model)?;
    let (est, reference) = match kind {
        "lambda" => {
            let est = probes::estimate_lambda_mc(&model, &x0, &direction(cfg, &model), cfg.t, ens, exec)?;
            let reference = if cfg.check_spectral {
                require_1d(&model, "--check-spectral")?;
                Some(solve(&model, cfg.n)?.lambda)
            } else {
                None
            };
            (est, reference)
        }
        "expectation" => {
            let h = observable(&cfg.h, &model)?;
            let est = probes::conditioned_expectation(&model, &*h, &x0, cfg.t, ens, exec)?;
            let reference = if cfg.check_spectral {
                require_1d(&model, "--check-spectral")?;
                Some(reference_1d(&cfg.h, &model, &solve(&model, cfg.n)?)?)
            } else {
                None
            };
            (est, reference)
        }
        other => return Err(CliError::usage(format!("unknown estimate '{other}', expected lambda or expectation"))),
    };
    let mut out = Output::default();
    let mut table = Table::new(&format!("estimate {kind}"), cfg, ESTIMATE_COLUMNS);
    table.push(estimate_row(&est));
    out.line(estimate_line(&est));
    if let Some(r) = reference {
        let budget = 3.0 * est.std_error + cfg.tol.unwrap_or(0.01);
        let diff = (est.value - r).abs();
        table.note(format!("spectral={}", num(r)));
        out.line(format!("spectral={} diff={} budget={} {}", num(r), num(diff), num(budget), verdict(diff <= budget)));
    }
    out.table = Some(table);
    Ok(out)
}

pub fn probe_cmd<E: Executor>(kind: &str, cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    match kind {
        "survival" => survival(cfg, exec),
        "qsd" => qsd(cfg, exec),
        "qed" => qed(cfg, exec),
        "convergence" => convergence(cfg, exec),
        "correlation" => correlation(cfg, exec),
        "sync" => sync(cfg, exec),
        "bounds" => bounds(cfg, exec),
        "spectrum" => spectrum(cfg, exec),
        other => Err(CliError::usage(format!("unknown probe '{other}'"))),
    }
}

fn survival<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let x0 = start(cfg, &model);
    let grid = cfg.t_grid.clone().unwrap_or_else(|| vec![2.0, 4.0, 6.0, 8.0]);
    let ens = ensemble_config(cfg, &model)?;
    let fit = probes::survival_rate_fit(&model, &x0, &grid, ens, exec)?;
    let mut out = Output::default();
    let mut table = Table::new("probe survival", cfg, ESTIMATE_COLUMNS);
    for &(t, k, n) in &fit.points {
        let p = k as f64 / n as f64;
        table.push(vec![num(t), num(p), num(binomial_se(p, n)), k.to_string(), n.to_string()]);
    }
    table.note(format!("slope={} slope_se={} rms_residual={}", num(fit.slope), num(fit.slope_se), num(fit.rms_residual)));
    out.line(format!("slope={} slope_se={} rms_residual={}", num(fit.slope), num(fit.slope_se), num(fit.rms_residual)));
    if model.dim() == 1 {
        let l0 = solve(&model, cfg.n)?.lambda0;
        let rel = ((fit.slope - l0) / l0).abs();
        let tol = cfg.tol.unwrap_or(0.05);
        out.line(format!("lambda0={} rel_dev={} tol={} {}", num(l0), num(rel), num(tol), verdict(rel <= tol)));
    }
    out.table = Some(table);
    Ok(out)
}

const HISTOGRAM_COLUMNS: &[&str] = &["bin_lo", "bin_hi", "mass", "reference_mass"];

fn histogram_table(command: &str, cfg: &RunConfig, bins: &[probes::HistogramBin]) -> Table {
    let mut table = Table::new(command, cfg, HISTOGRAM_COLUMNS);
    for b in bins {
        table.push(vec![num(b.lo), num(b.hi), num(b.mass), num(b.reference)]);
    }
    table
}

fn qsd<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    require_1d(&model, "probe qsd")?;
    let sol = solve(&model, cfg.n)?;
    let ens = ensemble_config(cfg, &model)?;
    let rep = probes::empirical_qsd(&model, &start(cfg, &model), cfg.t, cfg.bins, &sol, ens, exec)?;
    let tol = cfg.tol.unwrap_or(0.03);
    let mut out = Output::default();
    let mut table = histogram_table("probe qsd", cfg, &rep.bins);
    table.note(format!("tv={}", num(rep.tv)));
    out.table = Some(table);
    out.line(format!(
        "tv={} n_survivors={} n_total={} tol={} {}",
        num(rep.tv),
        rep.n_survivors,
        rep.n_total,
        num(tol),
        verdict(rep.tv <= tol)
    ));
    Ok(out)
}

fn qed<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    require_1d(&model, "probe qed")?;
    let sol = solve(&model, cfg.n)?;
    let ens = ensemble_config(cfg, &model)?;
    let rep = probes::empirical_qed(&model, &start(cfg, &model), cfg.t, cfg.bins, &sol, ens, exec)?;
    let tol = cfg.tol.unwrap_or(0.05);
    let mut out = Output::default();
    let mut table = histogram_table("probe qed", cfg, &rep.bins);
    table.note(format!("l1_m={} l1_nu={}", num(rep.l1_m), num(rep.l1_nu)));
    out.table = Some(table);
    out.line(format!(
        "l1_m={} l1_nu={} lambda_histogram={} lambda_mc={} std_error={} tol={} {}",
        num(rep.l1_m),
        num(rep.l1_nu),
        num(rep.lambda_from_histogram),
        num(rep.lambda.value),
        num(rep.lambda.std_error),
        num(tol),
        verdict(rep.l1_m <= tol)
    ));
    Ok(out)
}

/// Spectral exponent in 1D, otherwise `--lambda`, otherwise a Monte Carlo
/// estimate at horizon `t`.
fn reference_lambda<E: Executor>(cfg: &RunConfig, model: &SdeModel, t: f64, exec: &E) -> CliResult<f64> {
    if model.dim() == 1 {
        return Ok(solve(model, cfg.n)?.lambda);
    }
    if let Some(l) = cfg.lambda {
        return Ok(l);
    }
    let ens = ensemble_config(cfg, model)?;
    Ok(probes::estimate_lambda_mc(model, &start(cfg, model), &direction(cfg, model), t, ens, exec)?.value)
}

fn convergence<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let grid = cfg.t_grid.clone().unwrap_or_else(|| vec![2.0, 5.0, 10.0, 20.0]);
    let t_max = grid.iter().cloned().fold(0.0, f64::max);
    let lambda = reference_lambda(cfg, &model, t_max, exec)?;
    let eps = cfg.eps.unwrap_or(0.2);
    let ens = ensemble_config(cfg, &model)?;
    let curve = probes::convergence_probe(&model, &start(cfg, &model), &direction(cfg, &model), lambda, eps, &grid, ens, exec)?;
    let mut out = Output::default();
    let mut table = Table::new(
        "probe convergence",
        cfg,
        &["t", "estimate", "std_error", "n_survivors", "n_total", "wilson_lo", "wilson_hi", "variance", "chebyshev_bound"],
    );
    table.note(format!("lambda={} eps={}", num(lambda), num(eps)));
    for p in &curve.points {
        table.push(vec![
            num(p.t),
            num(p.probability),
            num(binomial_se(p.probability, p.n_survivors)),
            p.n_survivors.to_string(),
            p.n_total.to_string(),
            num(p.wilson_lo),
            num(p.wilson_hi),
            num(p.variance),
            num(p.chebyshev_bound),
        ]);
    }
    if curve.truncated {
        table.note("truncated: no survivors beyond the last row");
    }
    let (first, last) = (curve.points[0], curve.points[curve.points.len() - 1]);
    let ok = curve.points.len() > 1 && last.probability < first.probability && last.wilson_hi < first.wilson_lo;
    out.line(format!(
        "lambda={} eps={} p_first={} p_last={} truncated={} {}",
        num(lambda),
        num(eps),
        num(first.probability),
        num(last.probability),
        curve.truncated,
        verdict(ok)
    ));
    out.table = Some(table);
    Ok(out)
}

fn correlation<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let h1 = observable(&cfg.h1, &model)?;
    let h2 = observable(&cfg.h2, &model)?;
    let grid = cfg.t_grid.clone().unwrap_or_else(|| vec![cfg.t]);
    let ens = ensemble_config(cfg, &model)?;
    let pts = probes::correlation_probe(&model, &start(cfg, &model), &*h1, &*h2, cfg.q, cfg.r, &grid, ens, exec)?;
    let mut out = Output::default();
    let mut table = Table::new("probe correlation", cfg, ESTIMATE_COLUMNS);
    for p in &pts {
        table.push(estimate_row(&p.estimate));
    }
    let last = pts[pts.len() - 1].estimate;
    if model.dim() == 1 {
        let sol = solve(&model, cfg.n)?;
        let reference = reference_1d(&cfg.h1, &model, &sol)? * reference_1d(&cfg.h2, &model, &sol)?;
        table.note(format!("reference={}", num(reference)));
        let diff = (last.value - reference).abs();
        out.line(format!(
            "{} reference={} diff={} {}",
            estimate_line(&last),
            num(reference),
            num(diff),
            verdict(diff <= 3.0 * last.std_error)
        ));
    } else {
        out.line(estimate_line(&last));
    }
    out.table = Some(table);
    Ok(out)
}

fn sync<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let x0 = start(cfg, &model);
    let mut y0 = x0.clone();
    y0[0] += cfg.sep;
    let ens = ensemble_config(cfg, &model)?;
    let rep = probes::sync_probe(&model, &x0, &y0, cfg.t, ens, exec)?;
    let min = rep.relative_rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = rep.relative_rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Output::default();
    let mut table = Table::new("probe sync", cfg, ESTIMATE_COLUMNS);
    let reference = if model.dim() == 1 { Some(solve(&model, cfg.n)?.lambda) } else { cfg.lambda };
    let line = format!(
        "surviving_pairs={} n_pairs={} min_relative_rate={} max_relative_rate={} x_died_first={} y_died_first={}",
        rep.rates.len(),
        rep.n_pairs,
        num(min),
        num(max),
        rep.x_died_first,
        rep.y_died_first
    );
    match reference {
        Some(lambda) => {
            let threshold = lambda + cfg.eps.unwrap_or(0.1);
            let frac = rep.fraction_at_most(threshold);
            table.note(format!("lambda={} threshold={}", num(lambda), num(threshold)));
            table.push(vec![
                num(cfg.t),
                num(frac),
                num(binomial_se(frac, rep.rates.len())),
                rep.rates.len().to_string(),
                rep.n_pairs.to_string(),
            ]);
            out.line(format!(
                "{line} lambda={} fraction_below={} required={} {}",
                num(lambda),
                num(frac),
                num(1.0 - cfg.rho),
                verdict(frac >= 1.0 - cfg.rho)
            ));
        }
        None => {
            let (mean, se) = qlyap_core::stats::mean_and_se(&rep.rates);
            table.push(vec![num(cfg.t), num(mean), num(se), rep.rates.len().to_string(), rep.n_pairs.to_string()]);
            out.line(format!("{line} mean_rate={}", num(mean)));
        }
    }
    out.table = Some(table);
    Ok(out)
}

fn bounds<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let ens = ensemble_config(cfg, &model)?;
    let rep = probes::bounds_check(&model, &start(cfg, &model), &direction(cfg, &model), cfg.t, ens, exec)?;
    let mut out = Output::default();
    let mut table = Table::new("probe bounds", cfg, &["quantity", "t", "estimate", "std_error", "n_survivors", "n_total"]);
    for (name, e) in [("lower", &rep.lower), ("lambda", &rep.lambda), ("upper", &rep.upper)] {
        let mut row = vec![name.to_string()];
        row.extend(estimate_row(e));
        table.push(row);
    }
    out.line(format!(
        "lower={} lambda={} upper={} {}",
        num(rep.lower.value),
        num(rep.lambda.value),
        num(rep.upper.value),
        verdict(rep.holds_within(3.0))
    ));
    out.table = Some(table);
    Ok(out)
}

/// Directions for the spectrum probe: `+1` in 1D, `k` angles on a half
/// circle in 2D, coordinate axes otherwise.
pub fn direction_grid(dim: usize, k: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0]],
        2 => (0..k)
            .map(|j| {
                let a = std::f64::consts::PI * j as f64 / k as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        d => (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                v
            })
            .collect(),
    }
}

fn spectrum<E: Executor>(cfg: &RunConfig, exec: &E) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let xs = cfg.x0s.clone().unwrap_or_else(|| vec![start(cfg, &model)]);
    let vs = direction_grid(model.dim(), cfg.directions);
    let ens = ensemble_config(cfg, &model)?;
    let rep = probes::spectrum_probe(&model, &xs, &vs, cfg.t, ens, exec)?;
    let mut out = Output::default();
    let mut table = Table::new("probe spectrum", cfg, &["quantity", "value"]);
    for (name, v) in [
        ("sup", rep.sup),
        ("inf", rep.inf),
        ("mean", rep.mean),
        ("max_lambda_plus_average", rep.max_lambda_plus_average),
        ("min_lambda_minus_average", rep.min_lambda_minus_average),
    ] {
        table.push(vec![name.into(), num(v)]);
    }
    let ok = rep.inf <= rep.mean
        && rep.mean <= rep.sup
        && rep.sup <= rep.max_lambda_plus_average + 1e-12
        && rep.inf >= rep.min_lambda_minus_average - 1e-12;
    out.line(format!(
        "sup={} inf={} mean={} samples={} {}",
        num(rep.sup),
        num(rep.inf),
        num(rep.mean),
        rep.n_samples,
        verdict(ok)
    ));
    out.table = Some(table);
    Ok(out)
}

/// Single-path trace `t, x_1..x_d, s_1..s_d, logr, status`.
pub fn trace_cmd(cfg: &RunConfig) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=d).map(|i| format!("x_{i}")));
    columns.extend((1..=d).map(|i| format!("s_{i}")));
    columns.push("logr".into());
    columns.push("status".into());
    let cols: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new("trace", cfg, &cols);
    let step = StepConfig::new(cfg.dt, cfg.seed, cfg.path_id)?.with_killing(cfg.killing);
    let run = sim::run_path_traced(&model, &start(cfg, &model), &direction(cfg, &model), step, cfg.t, &[], |st| {
        let mut row = vec![num(st.t)];
        row.extend(st.x.iter().map(|v| num(*v)));
        row.extend(st.s.iter().map(|v| num(*v)));
        row.push(num(st.logr));
        row.push(if st.is_alive() { "alive".into() } else { "killed".into() });
        table.push(row);
    })?;
    let mut out = Output::default();
    out.line(match run.final_state.status {
        Status::Alive => format!("alive at t={} ftle={}", num(run.final_state.t), num(run.final_state.ftle())),
        Status::Killed { at } => format!("killed at t={}", num(at)),
    });
    out.table = Some(table);
    Ok(out)
}

