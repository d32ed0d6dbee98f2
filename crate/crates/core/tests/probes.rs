use qlyap_core::ensemble::{EnsembleConfig, Mode};
use qlyap_core::exec::Serial;
use qlyap_core::model::Domain;
use qlyap_core::probes;
use qlyap_core::spectral::{self, DEFAULT_POINTS, DEFAULT_TOL};
use qlyap_core::zoo::{self, Params};
use qlyap_core::{Error, SdeModel};

fn brownian() -> SdeModel {
    zoo::build("brownian", &Params::new(), 1.0, None).unwrap().model
}

fn pitchfork(c: f64) -> SdeModel {
    zoo::build("pitchfork", &Params::new().with("alpha", 1.0).with("c", c), 1.0, None)
        .unwrap()
        .model
}

fn fv(n: usize, seed: u64) -> EnsembleConfig {
    EnsembleConfig::new(n, 1e-3, seed, Mode::FlemingViot)
}

#[test]
fn constant_observable_is_exact() {
    let one = |_: &[f64]| 1.0;
    for mode in [Mode::Rejection, Mode::FlemingViot] {
        let cfg = EnsembleConfig::new(200, 1e-3, 1, mode);
        let est = probes::conditioned_expectation(&pitchfork(1.0), &one, &[0.0], 0.5, cfg, &Serial).unwrap();
        // time averages are sums of dt over t, so equal up to rounding
        assert!((est.value - 1.0).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
        assert_eq!(est.mode, mode);
        assert!(est.valid);
    }
}

#[test]
fn monte_carlo_exponent_matches_spectral_value() {
    let m = pitchfork(1.0);
    let sol = spectral::solve(&m, DEFAULT_POINTS, DEFAULT_TOL).unwrap();
    let est = probes::estimate_lambda_mc(&m, &[0.0], &[1.0], 6.0, fv(3000, 2), &Serial).unwrap();
    assert!(est.std_error > 0.0);
    assert!(
        (est.value - sol.lambda).abs() <= 4.0 * est.std_error + 0.02,
        "{} +- {} vs {}",
        est.value,
        est.std_error,
        sol.lambda
    );
    assert_eq!(est.n_survivors, 3000);
    assert_eq!(est.n_total, 3000);
}

#[test]
fn rejection_with_few_survivors_is_flagged() {
    let cfg = EnsembleConfig::new(40, 1e-3, 3, Mode::Rejection);
    let one = |_: &[f64]| 1.0;
    let est = probes::conditioned_expectation(&pitchfork(0.5), &one, &[0.0], 1.0, cfg, &Serial);
    match est {
        Ok(e) => assert!(!e.valid && e.n_survivors < probes::MIN_SURVIVORS),
        Err(Error::Starvation { .. }) => {}
        Err(e) => panic!("unexpected {e}"),
    }
}

#[test]
fn bounds_sandwich_in_two_dimensions() {
    let m = zoo::build("ring2d", &Params::new(), 0.8, None).unwrap().model;
    let rep = probes::bounds_check(&m, &[0.5, 0.0], &[1.0, 0.0], 3.0, fv(600, 4), &Serial).unwrap();
    assert!(rep.holds_within(0.0), "{rep:?}");
    assert!(rep.lower.value < rep.upper.value);
}

#[test]
fn survival_fit_recovers_principal_eigenvalue() {
    // -lambda0 = 1/2 on (0, pi)
    let cfg = EnsembleConfig::new(6000, 1e-3, 5, Mode::Rejection);
    let fit = probes::survival_rate_fit(&brownian(), &[1.5], &[1.0, 2.0, 3.0, 4.0], cfg, &Serial).unwrap();
    assert!((fit.slope + 0.5).abs() <= 3.0 * fit.slope_se + 0.03, "{fit:?}");
    assert_eq!(fit.points.len(), 4);
}

#[test]
fn survival_fit_needs_four_usable_times() {
    let cfg = EnsembleConfig::new(50, 1e-3, 5, Mode::Rejection);
    match probes::survival_rate_fit(&brownian(), &[1.5], &[1.0, 2.0, 3.0], cfg, &Serial) {
        Err(Error::Fit { usable }) => assert!(usable <= 3),
        other => panic!("expected fit error, got {other:?}"),
    }
}

#[test]
fn qsd_histogram_matches_sine_profile() {
    let m = brownian();
    let sol = spectral::solve(&m, 2000, DEFAULT_TOL).unwrap();
    let rep = probes::empirical_qsd(&m, &[0.5], 5.0, 32, &sol, fv(4000, 6), &Serial).unwrap();
    let total: f64 = rep.bins.iter().map(|b| b.mass).sum();
    let reference: f64 = rep.bins.iter().map(|b| b.reference).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((reference - 1.0).abs() < 1e-6);
    assert!(rep.tv < 0.08, "tv = {}", rep.tv);
}

#[test]
fn occupation_histogram_follows_qed_not_qsd() {
    let m = brownian();
    let sol = spectral::solve(&m, 2000, DEFAULT_TOL).unwrap();
    let rep = probes::empirical_qed(&m, &[1.5], 8.0, 32, &sol, fv(2000, 7), &Serial).unwrap();
    assert!(rep.l1_m < rep.l1_nu, "{} vs {}", rep.l1_m, rep.l1_nu);
    assert!(rep.l1_m < 0.1);
    // zero drift: both exponent estimates vanish
    assert_eq!(rep.lambda_from_histogram, 0.0);
    assert_eq!(rep.lambda.value, 0.0);
}

#[test]
fn convergence_probe_is_consistent_with_chebyshev() {
    let m = pitchfork(1.0);
    let sol = spectral::solve(&m, DEFAULT_POINTS, DEFAULT_TOL).unwrap();
    let curve = probes::convergence_probe(&m, &[0.0], &[1.0], sol.lambda, 0.3, &[1.0, 4.0, 8.0], fv(1000, 8), &Serial)
        .unwrap();
    assert!(!curve.truncated);
    assert_eq!(curve.points.len(), 3);
    for p in &curve.points {
        assert!(p.wilson_lo <= p.probability && p.probability <= p.wilson_hi);
        // Markov's inequality holds exactly for the empirical distribution
        assert!(p.probability <= p.chebyshev_bound + 1e-12);
    }
    assert!(curve.points[2].probability < curve.points[0].probability);
    assert!(curve.points[2].variance < curve.points[0].variance);
}

#[test]
fn convergence_probe_truncates_on_starvation() {
    let cfg = EnsembleConfig::new(20, 1e-3, 9, Mode::Rejection);
    let curve = probes::convergence_probe(&pitchfork(0.4), &[0.0], &[1.0], 0.0, 0.1, &[0.01, 30.0], cfg, &Serial)
        .unwrap();
    assert!(curve.truncated);
    assert_eq!(curve.points.len(), 1);
}

#[test]
fn correlation_of_constants_and_parameter_checks() {
    let m = pitchfork(1.0);
    let one = |_: &[f64]| 1.0;
    let pts = probes::correlation_probe(&m, &[0.0], &one, &one, 0.75, 0.25, &[1.0, 2.0], fv(200, 10), &Serial).unwrap();
    assert_eq!(pts.len(), 2);
    assert!(pts.iter().all(|p| p.estimate.value == 1.0 && p.estimate.std_error == 0.0));
    assert!(probes::correlation_probe(&m, &[0.0], &one, &one, 0.25, 0.75, &[1.0], fv(200, 10), &Serial).is_err());
}

#[test]
fn spectrum_extremes_stay_inside_envelopes() {
    let m = zoo::build("linear2d", &Params::new().with("a", 0.5).with("b", -1.0).with("omega", 1.0), 0.5, None)
        .unwrap()
        .model;
    let xs = vec![vec![0.0, 0.0], vec![0.3, 0.2]];
    let vs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let rep = probes::spectrum_probe(&m, &xs, &vs, 2.0, fv(200, 11), &Serial).unwrap();
    assert!(rep.inf <= rep.mean && rep.mean <= rep.sup);
    assert!(rep.sup <= rep.max_lambda_plus_average + 1e-12);
    assert!(rep.inf >= rep.min_lambda_minus_average - 1e-12);
    assert_eq!(rep.n_samples, 800);
}

#[test]
fn synchronized_linear_pairs_contract_deterministically() {
    let m = zoo::build("ou", &Params::new().with("kappa", 1.0), 0.2, Some(Domain::interval(-5.0, 5.0).unwrap()))
        .unwrap()
        .model;
    let cfg = EnsembleConfig::new(100, 1e-3, 12, Mode::Rejection);
    let rep = probes::sync_probe(&m, &[-0.5], &[0.5], 2.0, cfg, &Serial).unwrap();
    assert_eq!(rep.rates.len(), 100);
    assert!(rep.relative_rates.iter().all(|r| (r + 1.0).abs() < 1e-12));
    // unit initial separation: both rates agree
    assert!(rep.rates.iter().all(|r| (r + 1.0).abs() < 1e-12));
    assert_eq!(rep.fraction_at_most(-0.9), 1.0);
    assert_eq!(rep.x_died_first + rep.y_died_first, 0);
}

#[test]
fn bad_horizons_are_rejected() {
    let m = pitchfork(1.0);
    assert!(probes::estimate_lambda_mc(&m, &[0.0], &[1.0], 0.0, fv(10, 1), &Serial).is_err());
    assert!(probes::estimate_lambda_mc(&m, &[0.0], &[1.0], f64::NAN, fv(10, 1), &Serial).is_err());
}
