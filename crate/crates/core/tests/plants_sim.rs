mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use safeqp::frameworks::{solve_clf_cbf_qp, FrameworkConfig, Method};
use safeqp::plants::care::is_hurwitz;
use safeqp::plants::{care_residual, linear_model, solve_care, DoubleIntegratorParams, Plant};
use safeqp::qp::Status;
use safeqp::sim::*;
use safeqp::system::{build_constraint_row, verify_gradient, Certificate};

fn all_certificates(plant: &Plant) -> Vec<&Certificate> {
    std::iter::once(&plant.certificates.clf)
        .chain(&plant.certificates.barriers)
        .collect()
}

#[test]
fn plant_gradients_match_central_differences() {
    let mut rng = rng(21);
    for case in 1..=4 {
        let (_, plant) = acc_plant(case);
        for _ in 0..100 {
            let x = random_acc_state(&mut rng);
            for cert in all_certificates(&plant) {
                let err = verify_gradient(cert, &x, 1e-5).unwrap();
                assert!(err <= 1e-5, "case {case} {} at {x}: {err}", cert.label());
            }
        }
    }
    for params in [
        DoubleIntegratorParams::setting_a(),
        DoubleIntegratorParams::multi_obstacle(),
    ] {
        let plant = params.plant().unwrap();
        for _ in 0..100 {
            let x = random_di_state(&mut rng);
            for cert in all_certificates(&plant) {
                let err = verify_gradient(cert, &x, 1e-5).unwrap();
                assert!(err <= 1e-5, "{} at {x}: {err}", cert.label());
            }
        }
    }
}

#[test]
fn acc_dynamics_match_formula() {
    let (p, plant) = acc_plant(1);
    let mut rng = rng(22);
    for _ in 0..100 {
        let x = random_acc_state(&mut rng);
        let v = x[1];
        let fr = p.f0 + p.f1 * v + p.f2 * v * v;
        let drift = plant.system.drift(&x).unwrap();
        let expect = DVector::from_vec(vec![v, -fr / p.m, p.v0 - v]);
        assert!(vec_rel_err(&drift, &expect) <= 1e-14, "{drift} vs {expect}");
        let g = plant.system.input_map(&x).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 1.0 / p.m, 0.0]);
        assert!(rel_close(plant.system.nominal(&x).unwrap()[0], fr, 1e-14));
        let u = DVector::from_element(1, rng.gen_range(-5000.0..5000.0));
        let xdot = plant.system.vector_field(&x, &u).unwrap();
        assert!(rel_close(xdot[1], (u[0] - fr) / p.m, 1e-12));
    }
}

fn spd(n: usize, entries: &[f64], shift: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    &l * l.transpose() + DMatrix::identity(n, n) * shift
}

#[test]
fn double_integrator_care_default_weights() {
    let (a, b) = linear_model();
    let (q, r) = (DMatrix::identity(4, 4), DMatrix::identity(2, 2));
    let p = solve_care(&a, &b, &q, &r).unwrap();
    assert!(care_residual(&a, &b, &q, &r, &p).unwrap() <= 1e-8 * q.amax());
    let k = r.clone().cholesky().unwrap().solve(&(b.transpose() * &p));
    assert!(is_hurwitz(&(&a - &b * k)));
    assert_eq!(DoubleIntegratorParams::setting_a().lqr_value().unwrap(), p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn care_solution_is_stabilizing(
        qe in proptest::collection::vec(-1.0..1.0f64, 16),
        re in proptest::collection::vec(-1.0..1.0f64, 4),
        qs in 0.01..10.0f64,
        rs in 0.01..10.0f64,
    ) {
        let (a, b) = linear_model();
        let q = spd(4, &qe, qs);
        let r = spd(2, &re, rs);
        let p = solve_care(&a, &b, &q, &r).unwrap();
        prop_assert!(care_residual(&a, &b, &q, &r, &p).unwrap() <= 1e-8 * q.amax());
        let k = r.clone().cholesky().unwrap().solve(&(b.transpose() * &p));
        prop_assert!(is_hurwitz(&(&a - &b * k)));
        prop_assert!(p.clone().cholesky().is_some());
    }
}

fn run(plant: &Plant, cfg: &FrameworkConfig, sim: &SimConfig) -> TrajectoryLog {
    let log = simulate_plant(plant, cfg, sim).unwrap();
    assert!(log.aborted.is_none(), "{:?}", log.aborted);
    log
}

#[test]
fn barrier_is_distance_plus_its_rate() {
    let params = DoubleIntegratorParams::setting_a();
    let plant = params.plant().unwrap();
    let cfg = params.framework_config(Method::SafetyFirst);
    let sim = SimConfig {
        horizon: 10.0,
        ..SimConfig::default()
    };
    let log = run(&plant, &cfg, &sim);
    let o = params.obstacles[0].clone();
    let d = |x: &DVector<f64>| {
        (x[0] - o.center[0]).powi(2) + (x[1] - o.center[1]).powi(2) - o.radius * o.radius
    };
    let mut worst = 0.0_f64;
    for w in log.rows.windows(3) {
        let ddot = (d(&w[2].x) - d(&w[0].x)) / (2.0 * sim.dt);
        worst = worst.max((w[1].h[0] - (d(&w[1].x) + ddot)).abs());
    }
    assert!(worst <= 10.0 * sim.dt, "{worst}");
}

/// Max over logged states of `|row(u) − (ċ + rate·c)|` with `ċ` a forward
/// difference over one integration step of length `dt`.
fn row_derivative_error(plant: &Plant, log: &TrajectoryLog, dt: f64) -> f64 {
    let sys = &plant.system;
    let mut worst = 0.0_f64;
    for row in log
        .rows
        .iter()
        .filter(|r| r.status == Status::Optimal)
        .step_by(5)
    {
        let next = integrate_step(sys, &row.x, &row.u, dt, Integrator::Rk4).unwrap();
        for cert in all_certificates(plant) {
            let lhs = build_constraint_row(cert, sys, &row.x, None)
                .unwrap()
                .lhs(&row.u);
            let fd = (cert.value(&next) - cert.value(&row.x)) / dt
                + cert.decay_rate() * cert.value(&row.x);
            worst = worst.max((lhs - fd).abs() / (1.0 + lhs.abs()));
        }
    }
    worst
}

#[test]
fn constraint_rows_track_certificate_derivatives() {
    let (params, plant) = acc_plant(1);
    let log = run(
        &plant,
        &acc_config(&params, Method::SafetyFirst),
        &SimConfig {
            horizon: 5.0,
            ..SimConfig::default()
        },
    );
    let di = DoubleIntegratorParams::setting_a();
    let di_plant = di.plant().unwrap();
    let di_log = run(
        &di_plant,
        &di.framework_config(Method::SafetyFirst),
        &SimConfig {
            horizon: 5.0,
            ..SimConfig::default()
        },
    );
    for (plant, log) in [(&plant, &log), (&di_plant, &di_log)] {
        let coarse = row_derivative_error(plant, log, 1.0 / 50.0);
        let fine = row_derivative_error(plant, log, 1.0 / 500.0);
        let ratio = coarse / fine;
        assert!(
            (7.0..=13.0).contains(&ratio),
            "coarse {coarse}, fine {fine}, ratio {ratio}"
        );
    }
}

#[test]
fn integrator_orders() {
    let (_, plant) = acc_plant(1);
    let x0 = DVector::from_vec(vec![0.0, 20.0, 100.0]);
    let u = DVector::from_element(1, 1500.0);
    let terminal = |dt: f64, integ: Integrator| {
        let steps = (2.0 / dt).round() as usize;
        (0..steps).fold(x0.clone(), |x, _| {
            integrate_step(&plant.system, &x, &u, dt, integ).unwrap()
        })
    };
    for (integ, min_ratio) in [(Integrator::Rk4, 12.0), (Integrator::Euler, 1.8)] {
        let (a, b, c) = (
            terminal(0.2, integ),
            terminal(0.1, integ),
            terminal(0.05, integ),
        );
        let ratio = (&a - &b).norm() / (&b - &c).norm();
        assert!(ratio >= min_ratio, "{integ:?}: {ratio}");
    }
}

#[test]
fn logged_rows_satisfy_their_constraints() {
    let (params, plant) = acc_plant(1);
    let di = DoubleIntegratorParams::setting_a();
    let di_plant = di.plant().unwrap();
    let sim = SimConfig {
        horizon: 10.0,
        ..SimConfig::default()
    };
    for method in [Method::ClfCbfQp, Method::OptimalDecay, Method::SafetyFirst] {
        for (plant, cfg) in [
            (&plant, acc_config(&params, method)),
            (&di_plant, di.framework_config(method)),
        ] {
            let log = run(plant, &cfg, &sim);
            let sys = &plant.system;
            for row in log.rows.iter().filter(|r| r.status == Status::Optimal) {
                let clf = build_constraint_row(&plant.certificates.clf, sys, &row.x, None).unwrap();
                assert!(
                    clf.lhs(&row.u) <= row.delta1 + 1e-6,
                    "{method} V row at t = {}",
                    row.t
                );
                for (cert, d2) in plant.certificates.barriers.iter().zip(&row.delta2) {
                    let cbf = build_constraint_row(cert, sys, &row.x, None).unwrap();
                    assert!(
                        cbf.lhs(&row.u) >= d2 - 1e-6,
                        "{method} h row at t = {}",
                        row.t
                    );
                }
            }
        }
    }
}

fn bits(log: &TrajectoryLog) -> Vec<u64> {
    log.rows
        .iter()
        .flat_map(|r| {
            let mut v = vec![r.t, r.v, r.delta1];
            v.extend(r.x.iter().chain(r.u.iter()).chain(&r.h).chain(&r.delta2));
            v
        })
        .map(f64::to_bits)
        .collect()
}

#[test]
fn runs_are_bit_identical() {
    let (params, plant) = acc_plant(3);
    let sim = SimConfig {
        horizon: 4.0,
        ..SimConfig::default()
    };
    for method in [Method::ClfCbfQp, Method::OptimalDecay, Method::SafetyFirst] {
        let cfg = acc_config(&params, method);
        let (a, b) = (run(&plant, &cfg, &sim), run(&plant, &cfg, &sim));
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(
            a.rows.iter().map(|r| r.status).collect::<Vec<_>>(),
            b.rows.iter().map(|r| r.status).collect::<Vec<_>>()
        );
    }
}

#[test]
fn log_shape_and_stops() {
    let di = DoubleIntegratorParams::setting_a();
    let plant = di.plant().unwrap();
    let sim = SimConfig {
        horizon: 15.0,
        goal_tolerance: Some(GOAL_TOLERANCE),
        ..SimConfig::default()
    };
    let log = run(&plant, &di.framework_config(Method::SafetyFirst), &sim);
    for (i, row) in log.rows.iter().enumerate() {
        assert!((row.t - i as f64 * sim.dt).abs() < 1e-9);
    }
    let metrics = compute_metrics(&log, &plant.kind).unwrap();
    let t_goal = metrics.time_to_goal.expect("reaches goal");
    assert_eq!(log.rows.last().unwrap().t, t_goal);
    assert!(log.rows.len() < sim.steps() + 1);

    let (params, acc) = acc_plant(4);
    let sim = SimConfig {
        stop_on_collision: true,
        ..SimConfig::default()
    };
    let log = run(&acc, &acc_config(&params, Method::OptimalDecay), &sim);
    let metrics = compute_metrics(&log, &acc.kind).unwrap();
    assert!(metrics.collision);
    assert_eq!(
        log.rows.last().unwrap().t,
        metrics.first_collision_time.unwrap()
    );
}

#[test]
fn slacked_optimum_departs_from_cascade_on_case1() {
    let (params, plant) = acc_plant(1);
    let cfg = acc_config(&params, Method::SafetyFirst);
    let log = run(&plant, &cfg, &SimConfig::default());
    let (clf, cbf) = (&plant.certificates.clf, &plant.certificates.barriers[0]);
    let gap = log
        .rows
        .iter()
        .filter_map(|row| {
            let q = solve_clf_cbf_qp(
                &plant.system,
                clf,
                cbf,
                &cfg.with_method(Method::ClfCbfQp),
                &row.x,
            )
            .ok()?;
            q.is_optimal().then(|| (q.delta1 - row.delta1).abs())
        })
        .fold(0.0, f64::max);
    assert!(gap > 1e-3, "{gap}");
}
