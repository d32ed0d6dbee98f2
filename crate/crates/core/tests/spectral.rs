use std::f64::consts::PI;

use qlyap_core::model::Domain;
use qlyap_core::spectral::{self, Grid1D};
use qlyap_core::zoo::{self, Params};
use qlyap_core::SdeModel;

fn brownian(sigma: f64, a: f64, b: f64) -> SdeModel {
    zoo::build("brownian", &Params::new(), sigma, Some(Domain::interval(a, b).unwrap()))
        .unwrap()
        .model
}

fn pitchfork(alpha: f64, c: f64) -> SdeModel {
    zoo::build("pitchfork", &Params::new().with("alpha", alpha).with("c", c), 1.0, None)
        .unwrap()
        .model
}

fn ou(kappa: f64, a: f64, b: f64) -> SdeModel {
    zoo::build("ou", &Params::new().with("kappa", kappa), 1.0, Some(Domain::interval(a, b).unwrap()))
        .unwrap()
        .model
}

#[test]
fn gamma_closed_forms() {
    let model = brownian(1.0, 0.0, 1.0);
    let grid = Grid1D::for_model(&model, 100).unwrap();
    assert!(spectral::compute_gamma(&model, &grid).unwrap().iter().all(|g| *g == 0.0));

    // f = -x, sigma = 1 on (-1, 1): gamma = 1 - x^2 (trapezoid error <= h^2 * |f''|... = 0 for linear f)
    let model = ou(1.0, -1.0, 1.0);
    let grid = Grid1D::for_model(&model, 200).unwrap();
    let gamma = spectral::compute_gamma(&model, &grid).unwrap();
    for (x, g) in grid.points().iter().zip(&gamma) {
        assert!((g - (1.0 - x * x)).abs() < 1e-12, "x={x}");
    }

    // pitchfork alpha = 1 on (-c, c): (x^2 - x^4/2) - (c^2 - c^4/2), trapezoid error O(h^2)
    let c = 1.3;
    let model = pitchfork(1.0, c);
    let grid = Grid1D::for_model(&model, 2000).unwrap();
    let gamma = spectral::compute_gamma(&model, &grid).unwrap();
    let exact = |x: f64| (x * x - x.powi(4) / 2.0) - (c * c - c.powi(4) / 2.0);
    let h = grid.h();
    for (x, g) in grid.points().iter().zip(&gamma) {
        // |error| <= (b - a) h^2 max|f''| / 12 * (2 / sigma^2), f'' = -6x
        assert!((g - exact(*x)).abs() <= 2.0 * c * h * h * 6.0 * c / 12.0 * 2.0 + 1e-12);
    }
}

#[test]
fn zero_drift_generator_is_the_second_difference() {
    let model = brownian(2f64.sqrt(), 0.0, 1.0);
    let grid = Grid1D::for_model(&model, 16).unwrap();
    let gamma = spectral::compute_gamma(&model, &grid).unwrap();
    let t = spectral::assemble_generator(&model, &grid, &gamma).unwrap();
    let h2 = grid.h() * grid.h();
    for d in &t.diag {
        assert!((d + 2.0 / h2).abs() < 1e-9 * (2.0 / h2));
    }
    for o in &t.off {
        assert!((o - 1.0 / h2).abs() < 1e-9 * (1.0 / h2));
    }
}

#[test]
fn ou_generator_is_negative_definite() {
    let model = ou(1.0, -1.0, 1.0);
    let grid = Grid1D::for_model(&model, 500).unwrap();
    let gamma = spectral::compute_gamma(&model, &grid).unwrap();
    let t = spectral::assemble_generator(&model, &grid, &gamma).unwrap();
    // Sturm count: every eigenvalue lies below 0
    assert_eq!(t.count_below(0.0), t.len());
}

#[test]
fn generator_is_shift_invariant() {
    let model = pitchfork(1.0, 1.0);
    let grid = Grid1D::for_model(&model, 300).unwrap();
    let gamma = spectral::compute_gamma(&model, &grid).unwrap();
    let shifted: Vec<f64> = gamma.iter().map(|g| g + 10.0).collect();
    let base = spectral::solve_with_gamma(&model, grid, gamma, 1e-12).unwrap();
    let moved = spectral::solve_with_gamma(&model, grid, shifted, 1e-12).unwrap();
    assert!((base.lambda0 - moved.lambda0).abs() < 1e-9);
    assert!((base.lambda - moved.lambda).abs() < 1e-12);
    for i in 0..base.m.len() {
        assert!((base.m[i] - moved.m[i]).abs() < 1e-10);
        assert!((base.nu[i] - moved.nu[i]).abs() < 1e-10);
    }
}

#[test]
fn brownian_on_zero_pi() {
    let model = brownian(1.0, 0.0, PI);
    let sol = spectral::solve(&model, 2000, 1e-10).unwrap();
    assert!((sol.lambda0 + 0.5).abs() <= 1e-6, "lambda0 = {}", sol.lambda0);
    let sup = sol
        .x
        .iter()
        .zip(&sol.m)
        .map(|(x, m)| (m - 2.0 / PI * x.sin().powi(2)).abs())
        .fold(0.0, f64::max);
    assert!(sup <= 1e-4, "sup error {sup}");
    // survival curve
    assert_eq!(spectral::survival_curve(&sol, 0.0).unwrap(), 1.0);
    assert!((spectral::survival_curve(&sol, 2.0).unwrap() - (-1.0f64).exp()).abs() <= 2e-6);
    assert!(spectral::survival_curve(&sol, 3.0).unwrap() < spectral::survival_curve(&sol, 2.0).unwrap());
    assert!(spectral::survival_curve(&sol, -1.0).is_err());
    assert!(sol.lambda.abs() < 1e-15);
}

#[test]
fn laplacian_eigenvalue_on_unit_interval() {
    let model = brownian(2f64.sqrt(), 0.0, 1.0);
    let sol = spectral::solve(&model, 2000, 1e-10).unwrap();
    assert!((sol.lambda0 + PI * PI).abs() <= 1e-4, "lambda0 = {}", sol.lambda0);
}

fn richardson_ratio(values: [f64; 3]) -> f64 {
    (values[0] - values[1]) / (values[1] - values[2])
}

#[test]
fn second_order_convergence() {
    // n + 1 doubles so that h halves exactly
    for model in [pitchfork(1.0, 1.0), ou(0.7, -0.5, 1.5)] {
        let sols: Vec<_> = [199, 399, 799]
            .iter()
            .map(|&n| spectral::solve(&model, n, 1e-13).unwrap())
            .collect();
        let r0 = richardson_ratio([sols[0].lambda0, sols[1].lambda0, sols[2].lambda0]);
        assert!((3.5..=4.5).contains(&r0), "lambda0 ratio {r0}");
        if sols[0].lambda != sols[1].lambda {
            let r = richardson_ratio([sols[0].lambda, sols[1].lambda, sols[2].lambda]);
            if (sols[1].lambda - sols[2].lambda).abs() > 1e-11 {
                assert!((3.5..=4.5).contains(&r), "lambda ratio {r}");
            }
        }
    }
}

#[test]
fn solution_invariants() {
    for model in [pitchfork(1.0, 1.0), pitchfork(2.0, 2.5), ou(2.0, -1.0, 0.5), brownian(0.8, 1.0, 3.0)] {
        let sol = spectral::solve(&model, 1000, 1e-10).unwrap();
        let h = sol.grid.h();
        let k = sol.x.len();
        assert!(sol.lambda0 < 0.0);
        assert_eq!(sol.psi[0], 0.0);
        assert_eq!(sol.psi[k - 1], 0.0);
        assert!(sol.psi[1..k - 1].iter().all(|p| *p > 0.0));
        assert!(sol.nu[1..k - 1].iter().all(|p| *p > 0.0));
        assert!(sol.m[1..k - 1].iter().all(|p| *p > 0.0));
        assert_eq!((sol.nu[0], sol.nu[k - 1], sol.m[0], sol.m[k - 1]), (0.0, 0.0, 0.0, 0.0));
        let psi2: Vec<f64> = (0..k).map(|i| sol.psi[i].powi(2) * sol.gamma[i].exp()).collect();
        assert!((spectral::trapezoid(&psi2, h) - 1.0).abs() <= 1e-8);
        assert!((spectral::trapezoid(&sol.nu, h) - 1.0).abs() <= 1e-8);
        assert!((spectral::trapezoid(&sol.m, h) - 1.0).abs() <= 1e-6);
        for i in 1..k - 1 {
            if sol.nu[i] > 1e-12 {
                let rel = (sol.m[i] - sol.eta[i] * sol.nu[i]).abs() / sol.m[i];
                assert!(rel <= 1e-6, "m != eta nu at {i}: {rel}");
            }
        }
        let fp: Vec<f64> = sol.x.iter().map(|x| model.derivative_1d(*x)).collect();
        let lo = fp.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo - 1e-12 <= sol.lambda && sol.lambda <= hi + 1e-12);
    }
}

#[test]
fn constant_slope_is_exact() {
    for kappa in [0.5, 1.0, 2.0] {
        let model = ou(kappa, -0.7, 1.3);
        let sol = spectral::solve(&model, 2000, 1e-10).unwrap();
        assert!((sol.lambda + kappa).abs() <= 1e-10, "kappa {kappa}: {}", sol.lambda);
    }
}

#[test]
fn symmetric_problem_gives_even_density() {
    let model = pitchfork(1.0, 1.5);
    let sol = spectral::solve(&model, 2000, 1e-10).unwrap();
    let k = sol.m.len();
    for i in 0..k {
        assert!((sol.m[i] - sol.m[k - 1 - i]).abs() <= 1e-8);
    }
}

#[test]
fn pitchfork_small_domain_limit_and_sign_change() {
    let small = spectral::solve(&pitchfork(1.0, 0.05), 4000, 1e-10).unwrap();
    assert!((small.lambda - 1.0).abs() <= 0.05, "lambda(0.05) = {}", small.lambda);
    let big = spectral::solve(&pitchfork(1.0, 3.0), 4000, 1e-10).unwrap();
    assert!(small.lambda > 0.0 && big.lambda < 0.0);
}

#[test]
fn identity_forms_agree() {
    let model = brownian(1.0, 0.0, PI);
    let sol = spectral::solve(&model, 2000, 1e-10).unwrap();
    let rep = spectral::identity_check(&model, &sol);
    assert!(rep.dev_two <= 1e-3, "{rep:?}");

    let model = ou(1.0, -1.0, 1.0);
    let sol = spectral::solve(&model, 4000, 1e-10).unwrap();
    let rep = spectral::identity_check(&model, &sol);
    assert!(rep.dev_one <= 1e-4 && rep.dev_two <= 1e-4, "{rep:?}");
    assert!((rep.form_one + 1.0).abs() <= 1e-4);
}

#[test]
fn identity_deviation_shrinks_quadratically() {
    let model = pitchfork(1.0, 1.0);
    let devs: Vec<(f64, f64)> = [999, 1999, 3999]
        .iter()
        .map(|&n| {
            let sol = spectral::solve(&model, n, 1e-12).unwrap();
            let r = spectral::identity_check(&model, &sol);
            (r.dev_one, r.dev_two)
        })
        .collect();
    for w in devs.windows(2) {
        let r1 = w[0].0 / w[1].0;
        let r2 = w[0].1 / w[1].1;
        assert!((3.0..=5.0).contains(&r1), "form one ratio {r1} {devs:?}");
        assert!((3.0..=5.0).contains(&r2), "form two ratio {r2} {devs:?}");
    }
}

#[test]
fn one_dimensional_bounds_collapse() {
    let model = pitchfork(1.0, 1.0);
    let sol = spectral::solve(&model, 1000, 1e-10).unwrap();
    let plus = sol.integrate_against_m(|x| qlyap_core::model::lambda_plus_minus(&model, &[x]).unwrap().0);
    let minus = sol.integrate_against_m(|x| qlyap_core::model::lambda_plus_minus(&model, &[x]).unwrap().1);
    assert_eq!(plus, sol.lambda);
    assert_eq!(minus, sol.lambda);
}

#[test]
fn rejects_bad_grids_and_models() {
    assert!(Grid1D::new(0.0, 1.0, 7).is_err());
    assert!(Grid1D::new(1.0, 1.0, 100).is_err());
    let ring = zoo::build("ring2d", &Params::new(), 1.0, None).unwrap().model;
    assert!(spectral::solve(&ring, 100, 1e-10).is_err());
}
