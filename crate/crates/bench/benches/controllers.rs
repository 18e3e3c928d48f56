use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};

use safeqp::frameworks::{control_step, Method};
use safeqp::plants::{AccParams, DoubleIntegratorParams};
use safeqp::sim::{simulate_plant, SimConfig};
use safeqp::{solve_qp, QpProblem};

fn qp(c: &mut Criterion) {
    // Box-constrained 4-variable problem with two coupling half-planes.
    let h = DMatrix::from_row_slice(
        4,
        4,
        &[
            4.0, 1.0, 0.0, 0.5, 1.0, 3.0, 0.2, 0.0, 0.0, 0.2, 2.0, 0.3, 0.5, 0.0, 0.3, 1.5,
        ],
    );
    let f = DVector::from_vec(vec![-8.0, 3.0, -1.0, 2.0]);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..4 {
        for sign in [1.0, -1.0] {
            let mut r = vec![0.0; 4];
            r[i] = sign;
            rows.extend(r);
            rhs.push(1.0);
        }
    }
    rows.extend([1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 0.5, 0.0]);
    rhs.extend([0.5, 0.2]);
    let a = DMatrix::from_row_slice(rhs.len(), 4, &rows);
    let problem = QpProblem::new(h, f, a, DVector::from_vec(rhs)).unwrap();
    c.bench_function("solve_qp/4x10", |b| {
        b.iter(|| solve_qp(black_box(&problem)).unwrap())
    });
}

fn steps(c: &mut Criterion) {
    let acc = AccParams::default();
    let plant = acc.plant().unwrap();
    let x = plant.x0.clone();
    for method in [
        Method::ClfCbfQp,
        Method::OptimalDecay,
        Method::SafetyFirst,
        Method::LimitWeight,
    ] {
        let cfg = acc.framework_config(method);
        c.bench_function(&format!("acc_step/{method}"), |b| {
            b.iter(|| {
                control_step(&plant.system, &plant.certificates, &cfg, black_box(&x)).unwrap()
            })
        });
    }

    let multi = DoubleIntegratorParams::multi_obstacle();
    let plant = multi.plant().unwrap();
    let cfg = multi.framework_config(Method::SafetyFirst);
    c.bench_function("agv_multi_step/safety-first", |b| {
        b.iter(|| {
            control_step(
                &plant.system,
                &plant.certificates,
                &cfg,
                black_box(&plant.x0),
            )
            .unwrap()
        })
    });
}

fn simulation(c: &mut Criterion) {
    let acc = AccParams::default();
    let plant = acc.plant().unwrap();
    let cfg = acc.framework_config(Method::SafetyFirst);
    let sim = SimConfig::default();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("acc_20s/safety-first", |b| {
        b.iter(|| simulate_plant(&plant, &cfg, &sim).unwrap())
    });
    group.finish();
}

criterion_group!(benches, qp, steps, simulation);
criterion_main!(benches);
