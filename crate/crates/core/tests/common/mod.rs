#![allow(dead_code)]

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safeqp::frameworks::{FrameworkConfig, Method};
use safeqp::plants::{AccParams, DoubleIntegratorParams, Plant};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn acc_case(case: usize) -> AccParams {
    let (s0, v_d) = match case {
        1 => ([0.0, 20.0, 100.0], 10.0),
        2 => ([0.0, 20.0, 100.0], 24.0),
        3 => ([0.0, 20.0, 20.0], 10.0),
        4 => ([0.0, 20.0, 20.0], 24.0),
        _ => panic!("no ACC case {case}"),
    };
    AccParams {
        s0,
        v_d,
        ..AccParams::default()
    }
}

pub fn acc_plant(case: usize) -> (AccParams, Plant) {
    let params = acc_case(case);
    let plant = params.plant().unwrap();
    (params, plant)
}

pub fn acc_config(params: &AccParams, method: Method) -> FrameworkConfig {
    params.framework_config(method)
}

/// Speeds in [0, 35] m/s, gaps in [−30, 150] m.
pub fn random_acc_state(rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_vec(vec![
        rng.gen_range(0.0..100.0),
        rng.gen_range(0.0..35.0),
        rng.gen_range(-30.0..150.0),
    ])
}

/// Positions in [−2, 12]², velocities in [−3, 3]².
pub fn random_di_state(rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_vec(vec![
        rng.gen_range(-2.0..12.0),
        rng.gen_range(-2.0..12.0),
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-3.0..3.0),
    ])
}

pub fn di_plant(params: &DoubleIntegratorParams) -> Plant {
    params.plant().unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn vec_rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / (1.0 + a.amax().max(b.amax()))
}
