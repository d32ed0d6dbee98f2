use qlyap_core::model::{lambda_plus_minus, Domain};
use qlyap_core::sim::{
    self, bridge_crossing_probability, em_step, polar_update, FirstDeath, KillingRule, PathState,
    Status, StepConfig, Workspace,
};
use qlyap_core::zoo::{self, Params};
use qlyap_core::SdeModel;

fn model(name: &str, params: Params, sigma: f64, domain: Option<Domain>) -> SdeModel {
    zoo::build(name, &params, sigma, domain).unwrap().model
}

fn pitchfork(c: f64) -> SdeModel {
    model("pitchfork", Params::new().with("alpha", 1.0).with("c", c), 1.0, None)
}

#[test]
fn one_dimensional_log_growth_is_integral_of_slope() {
    let m = pitchfork(1.0);
    for path_id in 0..5 {
        let cfg = StepConfig::new(1e-3, 11, path_id).unwrap();
        let dt = cfg.dt;
        let mut integral = 0.0;
        let mut prev: Option<f64> = None;
        let run = sim::run_path_traced(&m, &[0.1], &[1.0], cfg, 2.0, &[2.0], |st| {
            if let Some(x) = prev {
                integral += m.derivative_1d(x) * dt;
            }
            prev = Some(st.x[0]);
        })
        .unwrap();
        // the last observed position never drives a step
        let st = &run.final_state;
        assert!((st.logr - integral).abs() <= 1e-12 * integral.abs().max(1.0), "path {path_id}");
        assert_eq!(st.s, vec![1.0]);
    }
}

#[test]
fn runs_are_deterministic_per_stream() {
    let m = model("ring2d", Params::new(), 0.5, None);
    let cfg = StepConfig::new(1e-3, 5, 3).unwrap();
    let a = sim::run_path(&m, &[0.2, 0.1], &[1.0, 1.0], cfg, 1.0, &[0.5, 1.0]).unwrap();
    let b = sim::run_path(&m, &[0.2, 0.1], &[1.0, 1.0], cfg, 1.0, &[0.5, 1.0]).unwrap();
    assert_eq!(a, b);
    let other = StepConfig::new(1e-3, 5, 4).unwrap();
    let c = sim::run_path(&m, &[0.2, 0.1], &[1.0, 1.0], other, 1.0, &[0.5, 1.0]).unwrap();
    assert_ne!(a.final_state.x, c.final_state.x);
}

#[test]
fn constant_slope_gives_exact_exponent() {
    // f = -2x on a domain large enough that no path exits in the horizon
    let m = model("ou", Params::new().with("kappa", 2.0), 0.3, Some(Domain::interval(-50.0, 50.0).unwrap()));
    let cfg = StepConfig::new(1e-3, 1, 0).unwrap();
    let run = sim::run_path(&m, &[0.0], &[1.0], cfg, 3.0, &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(run.ftle.len(), 3);
    for (_, l) in run.ftle {
        assert!((l + 2.0).abs() < 1e-12);
    }
}

#[test]
fn em_step_moves_and_kills_on_exit() {
    let m = model("brownian", Params::new(), 1.0, Some(Domain::interval(0.0, 3.0).unwrap()));
    let mut ws = Workspace::new(1);
    let mut st = PathState::new(&m, &[1.0], &[1.0]).unwrap();
    em_step(&m, &mut st, &[0.5], 0.01, &mut ws).unwrap();
    assert_eq!(st.x, vec![1.5]);
    assert!(st.is_alive());
    em_step(&m, &mut st, &[2.0], 0.01, &mut ws).unwrap();
    assert_eq!(st.x, vec![3.0]);
    assert_eq!(st.status, Status::Killed { at: 0.02 });
    // frozen afterwards
    em_step(&m, &mut st, &[-1.0], 0.01, &mut ws).unwrap();
    assert_eq!(st.x, vec![3.0]);
    assert_eq!(st.step, 2);
}

#[test]
fn em_step_exit_point_in_a_ball() {
    let m = model("ring2d", Params::new().with("radius", 1.0), 1.0, None);
    let mut ws = Workspace::new(2);
    let mut st = PathState::new(&m, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
    // drift vanishes at the origin; the step goes straight to (2, 0)
    em_step(&m, &mut st, &[2.0, 0.0], 0.1, &mut ws).unwrap();
    assert!(!st.is_alive());
    assert!((st.x[0] - 1.0).abs() < 1e-12 && st.x[1].abs() < 1e-12);
}

#[test]
fn polar_update_on_a_saddle() {
    let m = model("linear2d", Params::new().with("a", 1.0).with("b", -1.0).with("omega", 0.0), 1.0, None);
    let jac = m.jacobian(&[0.0, 0.0]);
    let mut js = vec![0.0; 2];

    let mut st = PathState::new(&m, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
    assert_eq!(polar_update(&mut st, &jac, &mut js, 0.1), 1.0);
    assert_eq!(st.s, vec![1.0, 0.0]);
    assert!((st.logr - 0.1).abs() < 1e-15);

    let mut st = PathState::new(&m, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let rate = polar_update(&mut st, &jac, &mut js, 0.1);
    assert!(rate.abs() < 1e-15);
    // rotated toward the unstable axis, still unit length
    assert!(st.s[0] > st.s[1]);
    assert!((st.s[0].hypot(st.s[1]) - 1.0).abs() < 1e-15);
}

#[test]
fn pathwise_exponent_is_sandwiched_by_time_averaged_bounds() {
    let m = model("ring2d", Params::new(), 0.7, None);
    for path_id in 0..10 {
        let cfg = StepConfig::new(1e-3, 2, path_id).unwrap();
        let (mut hi, mut lo) = (0.0, 0.0);
        let mut prev: Option<Vec<f64>> = None;
        let run = sim::run_path_traced(&m, &[0.3, -0.2], &[0.6, 0.8], cfg, 1.0, &[], |st| {
            if let Some(x) = prev.take() {
                let (p, q) = lambda_plus_minus(&m, &x).unwrap();
                hi += p * 1e-3;
                lo += q * 1e-3;
            }
            if st.is_alive() {
                prev = Some(st.x.clone());
            }
        })
        .unwrap();
        let logr = run.final_state.logr;
        assert!(lo - 1e-12 <= logr && logr <= hi + 1e-12, "path {path_id}: {lo} <= {logr} <= {hi}");
    }
}

#[test]
fn bridge_probability_limits() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    assert_eq!(bridge_crossing_probability(&d, &[0.5], &[0.5], 1e-3), 0.0);
    assert_eq!(bridge_crossing_probability(&d, &[0.0], &[0.5], 1e-3), 1.0);
    let near = bridge_crossing_probability(&d, &[0.01], &[0.01], 1e-3);
    let far = bridge_crossing_probability(&d, &[0.02], &[0.02], 1e-3);
    assert!((near - (-0.2f64).exp()).abs() < 1e-12);
    assert!(far < near);
    let b = Domain::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    // the corner sees both faces
    let corner = bridge_crossing_probability(&b, &[0.01, 0.01], &[0.01, 0.01], 1e-3);
    assert!((corner - (1.0 - (1.0 - near) * (1.0 - near))).abs() < 1e-12);
}

#[test]
fn bridge_rule_kills_earlier_than_segment_rule() {
    let m = pitchfork(0.5);
    let mean_death = |rule: KillingRule| {
        let mut total = 0.0;
        for id in 0..400 {
            let cfg = StepConfig::new(1e-2, 9, id).unwrap().with_killing(rule);
            let run = sim::run_path(&m, &[0.0], &[1.0], cfg, 50.0, &[]).unwrap();
            match run.final_state.status {
                Status::Killed { at } => total += at,
                Status::Alive => panic!("path survived"),
            }
        }
        total / 400.0
    };
    assert!(mean_death(KillingRule::Bridge) < mean_death(KillingRule::Segment));
}

#[test]
fn identical_pair_never_separates() {
    let m = pitchfork(1.0);
    let cfg = StepConfig::new(1e-3, 3, 0).unwrap();
    let run = sim::run_pair(&m, &[0.2], &[0.2], cfg, 0.5, &[0.1, 0.5]).unwrap();
    assert_eq!(run.samples.len(), 2);
    assert!(run.samples.iter().all(|p| p.rate == f64::NEG_INFINITY && p.relative_rate == f64::NEG_INFINITY));
}

#[test]
fn contracting_pair_records_first_death() {
    let m = model("ou", Params::new().with("kappa", 1.0), 1.0, Some(Domain::interval(-1.0, 1.0).unwrap()));
    let mut seen = [0usize; 3];
    for id in 0..50 {
        let cfg = StepConfig::new(1e-3, 4, id).unwrap();
        let run = sim::run_pair(&m, &[-0.5], &[0.25], cfg, 20.0, &[0.5]).unwrap();
        // linear drift and common noise: the gap is 0.75 e^{-t}
        if let Some(p) = run.samples.first() {
            assert!((p.relative_rate + 1.0).abs() < 1e-12, "{p:?}");
            assert!((p.rate - (0.75f64.ln() / 0.5 - 1.0)).abs() < 1e-12, "{p:?}");
        }
        match run.first_death {
            FirstDeath::X => seen[0] += 1,
            FirstDeath::Y => seen[1] += 1,
            FirstDeath::Both => seen[2] += 1,
            FirstDeath::None => panic!("pair survived 20 time units"),
        }
        assert!(run.death_time.unwrap() > 0.0);
    }
    assert!(seen[0] > 0 && seen[1] > 0);
}

#[test]
fn pair_gap_matches_euler_difference_for_nonlinear_drift() {
    // with common noise y - x follows the deterministic Euler recursion to first order
    let m = pitchfork(2.0);
    let cfg = StepConfig::new(1e-4, 8, 0).unwrap();
    let pair = sim::run_pair(&m, &[0.1], &[0.3], cfg, 0.5, &[0.5]).unwrap();
    let (mut x, mut y) = (vec![0.1], vec![0.3]);
    let mut noise = cfg.stream();
    let mut dw = vec![0.0];
    for _ in 0..5000 {
        noise.increments(1e-2, &mut dw);
        let (fx, fy) = (m.drift_1d(x[0]), m.drift_1d(y[0]));
        x[0] += fx * 1e-4 + dw[0];
        y[0] += fy * 1e-4 + dw[0];
        noise.uniform();
    }
    let euler = ((y[0] - x[0]).abs().ln()) / 0.5;
    assert!((pair.samples[0].rate - euler).abs() < 1e-3, "{:?} vs {euler}", pair.samples);
}

#[test]
fn tiny_separations_follow_the_tangent_flow() {
    let m = pitchfork(2.0);
    // segment rule: both runners then consume the same increments
    let cfg = StepConfig::new(1e-3, 8, 1).unwrap().with_killing(KillingRule::Segment);
    let pair = sim::run_pair(&m, &[0.1], &[0.1 + 1e-12], cfg, 2.0, &[2.0]).unwrap();
    let path = sim::run_path(&m, &[0.1], &[1.0], cfg, 2.0, &[2.0]).unwrap();
    if let (Some(p), Some((_, l))) = (pair.samples.first(), path.ftle.first()) {
        assert!((p.relative_rate - l).abs() < 1e-6, "{p:?} vs {l}");
    } else {
        panic!("pair or path died");
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let m = pitchfork(1.0);
    assert!(PathState::new(&m, &[2.0], &[1.0]).is_err());
    assert!(PathState::new(&m, &[0.0], &[0.0]).is_err());
    assert!(PathState::new(&m, &[0.0, 0.0], &[1.0]).is_err());
    assert!(StepConfig::new(0.0, 1, 0).is_err());
    let cfg = StepConfig::new(1e-3, 1, 0).unwrap();
    assert!(sim::run_path(&m, &[0.0], &[1.0], cfg, 1.0, &[2.0]).is_err());
    assert!(sim::checkpoint_steps(&[-1.0], 1e-3).is_err());
    assert_eq!(sim::checkpoint_steps(&[0.2, 0.1, 0.1000001, 1e-9], 0.1).unwrap(), vec![1, 2]);
}
