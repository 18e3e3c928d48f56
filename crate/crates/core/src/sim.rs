//! Fixed-step closed-loop simulation with zero-order-hold input.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frameworks::{control_step, CertificateSet, FrameworkConfig, Method};
use crate::plants::{Plant, PlantKind};
use crate::qp::Status;
use crate::system::ControlAffineSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub integrator: Integrator,
    /// Stop once within this distance of the goal (position and speed).
    pub goal_tolerance: Option<f64>,
    pub stop_on_collision: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            horizon: 20.0,
            integrator: Integrator::Rk4,
            goal_tolerance: None,
            stop_on_collision: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::Validation(format!(
                "horizon {} must be at least dt {}",
                self.horizon, self.dt
            )));
        }
        if let Some(tol) = self.goal_tolerance {
            if !(tol > 0.0) {
                return Err(Error::Validation(format!(
                    "goal tolerance must be positive, got {tol}"
                )));
            }
        }
        Ok(())
    }

    /// Number of integration steps; the log has one more row.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// One step of `ẋ = f(x) + g(x)u` with `u` held constant.
pub fn integrate_step(
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
    integrator: Integrator,
) -> Result<DVector<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Validation(format!("dt must be positive, got {dt}")));
    }
    let next = match integrator {
        Integrator::Euler => x + sys.vector_field(x, u)? * dt,
        Integrator::Rk4 => {
            let k1 = sys.vector_field(x, u)?;
            let k2 = sys.vector_field(&(x + &k1 * (dt / 2.0)), u)?;
            let k3 = sys.vector_field(&(x + &k2 * (dt / 2.0)), u)?;
            let k4 = sys.vector_field(&(x + &k3 * dt), u)?;
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
        }
    };
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("state became non-finite".into()));
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub v: f64,
    pub h: Vec<f64>,
    pub delta1: f64,
    pub delta2: Vec<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub scenario_id: String,
    pub method: Method,
    pub config_hash: String,
    pub dt: f64,
    pub state_dim: usize,
    pub input_dim: usize,
    pub barrier_count: usize,
    pub rows: Vec<LogRow>,
    /// Set when a numerical failure cut the run short.
    pub aborted: Option<String>,
}

impl TrajectoryLog {
    pub fn with_metadata(
        mut self,
        scenario_id: impl Into<String>,
        config_hash: impl Into<String>,
    ) -> Self {
        self.scenario_id = scenario_id.into();
        self.config_hash = config_hash.into();
        self
    }
}

/// Runs until the horizon with no stop conditions.
pub fn simulate(
    sys: &ControlAffineSystem,
    certs: &CertificateSet,
    cfg: &FrameworkConfig,
    sim: &SimConfig,
    x0: &DVector<f64>,
) -> Result<TrajectoryLog> {
    run(sys, certs, cfg, sim, x0, &PlantKind::Generic)
}

/// Runs a plant from its initial state, honoring goal and collision stops.
pub fn simulate_plant(
    plant: &Plant,
    cfg: &FrameworkConfig,
    sim: &SimConfig,
) -> Result<TrajectoryLog> {
    run(
        &plant.system,
        &plant.certificates,
        cfg,
        sim,
        &plant.x0,
        &plant.kind,
    )
}

fn run(
    sys: &ControlAffineSystem,
    certs: &CertificateSet,
    cfg: &FrameworkConfig,
    sim: &SimConfig,
    x0: &DVector<f64>,
    kind: &PlantKind,
) -> Result<TrajectoryLog> {
    sim.validate()?;
    cfg.validate(sys.input_dim())?;
    crate::error::check_dim("initial state", sys.state_dim(), x0.len())?;
    let mut log = TrajectoryLog {
        scenario_id: String::new(),
        method: cfg.method,
        config_hash: String::new(),
        dt: sim.dt,
        state_dim: sys.state_dim(),
        input_dim: sys.input_dim(),
        barrier_count: certs.barriers.len(),
        rows: Vec::with_capacity(sim.steps() + 1),
        aborted: None,
    };
    let mut x = x0.clone();
    let steps = sim.steps();
    for i in 0..=steps {
        let t = i as f64 * sim.dt;
        let res = match control_step(sys, certs, cfg, &x) {
            Ok(res) => res,
            Err(e) => {
                log.aborted = Some(format!("t = {t}: {e}"));
                break;
            }
        };
        log.rows.push(LogRow {
            t,
            x: x.clone(),
            u: res.u.clone(),
            v: certs.clf.value(&x),
            h: certs.barriers.iter().map(|b| b.value(&x)).collect(),
            delta1: res.delta1,
            delta2: res.delta2,
            status: res.status,
        });
        let at_goal = sim.goal_tolerance.is_some_and(|tol| kind.at_goal(&x, tol));
        if i == steps || at_goal || (sim.stop_on_collision && kind.collided(&x)) {
            break;
        }
        match integrate_step(sys, &x, &res.u, sim.dt, sim.integrator) {
            Ok(next) => x = next,
            Err(e) => {
                log.aborted = Some(format!("t = {t}: {e}"));
                break;
            }
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: usize,
    pub min_h: Vec<f64>,
    /// ACC: smallest gap `z`. Double integrator: smallest `‖p − pᵢ‖ − ρᵢ` per obstacle.
    pub min_clearance: Vec<f64>,
    pub first_infeasible_time: Option<f64>,
    pub infeasible_step_count: usize,
    pub collision: bool,
    pub first_collision_time: Option<f64>,
    pub time_to_goal: Option<f64>,
    /// First time with `|v − v_d| ≤ 0.1` (ACC).
    pub settling_time: Option<f64>,
    pub terminal_v: f64,
    pub aborted: bool,
}

pub const SETTLING_BAND: f64 = 0.1;
pub const GOAL_TOLERANCE: f64 = 0.1;

pub fn compute_metrics(log: &TrajectoryLog, kind: &PlantKind) -> Result<RunMetrics> {
    let last = log
        .rows
        .last()
        .ok_or_else(|| Error::Validation("cannot compute metrics of an empty log".into()))?;
    let mut min_h = vec![f64::INFINITY; log.barrier_count];
    for row in &log.rows {
        for (m, h) in min_h.iter_mut().zip(&row.h) {
            *m = m.min(*h);
        }
    }
    let min_clearance = match kind {
        PlantKind::Generic => Vec::new(),
        PlantKind::Acc { .. } => vec![log
            .rows
            .iter()
            .map(|r| r.x[2])
            .fold(f64::INFINITY, f64::min)],
        PlantKind::DoubleIntegrator { obstacles, .. } => obstacles
            .iter()
            .map(|o| {
                log.rows
                    .iter()
                    .map(|r| o.distance([r.x[0], r.x[1]]) - o.radius)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect(),
    };
    let first_time =
        |pred: &dyn Fn(&LogRow) -> bool| log.rows.iter().find(|r| pred(r)).map(|r| r.t);
    let first_collision_time = first_time(&|r| kind.collided(&r.x));
    let settling_time = match kind {
        PlantKind::Acc { desired_velocity } => {
            first_time(&|r| (r.x[1] - desired_velocity).abs() <= SETTLING_BAND)
        }
        _ => None,
    };
    Ok(RunMetrics {
        steps: log.rows.len(),
        min_h,
        min_clearance,
        first_infeasible_time: first_time(&|r| r.status == Status::Infeasible),
        infeasible_step_count: log
            .rows
            .iter()
            .filter(|r| r.status == Status::Infeasible)
            .count(),
        collision: first_collision_time.is_some(),
        first_collision_time,
        time_to_goal: first_time(&|r| kind.at_goal(&r.x, GOAL_TOLERANCE)),
        settling_time,
        terminal_v: last.v,
        aborted: log.aborted.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{di_system, DoubleIntegratorParams};

    fn di() -> ControlAffineSystem {
        di_system(&DoubleIntegratorParams::setting_a()).unwrap()
    }

    #[test]
    fn euler_and_rk4_coast() {
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let u = DVector::zeros(2);
        let expect = DVector::from_vec(vec![0.02, 0.0, 1.0, 0.0]);
        for integ in [Integrator::Euler, Integrator::Rk4] {
            let next = integrate_step(&di(), &x, &u, 0.02, integ).unwrap();
            assert!((next - &expect).amax() < 1e-15);
        }
    }

    #[test]
    fn rk4_constant_acceleration_is_exact() {
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let next = integrate_step(&di(), &x, &u, 0.02, Integrator::Rk4).unwrap();
        let expect = DVector::from_vec(vec![0.02 + 0.5 * 0.02 * 0.02, 0.0, 1.02, 0.0]);
        assert!((next - expect).amax() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SimConfig {
            dt: 0.0,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig {
            horizon: 0.01,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn log_with(rows: Vec<LogRow>) -> TrajectoryLog {
        TrajectoryLog {
            scenario_id: "t".into(),
            method: Method::SafetyFirst,
            config_hash: String::new(),
            dt: 0.02,
            state_dim: 4,
            input_dim: 2,
            barrier_count: 1,
            rows,
            aborted: None,
        }
    }

    fn row(i: usize, x: [f64; 4], h: f64, status: Status) -> LogRow {
        LogRow {
            t: i as f64 * 0.02,
            x: DVector::from_row_slice(&x),
            u: DVector::zeros(2),
            v: 1.0,
            h: vec![h],
            delta1: 0.0,
            delta2: vec![0.0],
            status,
        }
    }

    #[test]
    fn constant_log_metrics() {
        let log = log_with(
            (0..10)
                .map(|i| row(i, [0.0; 4], 5.0, Status::Optimal))
                .collect(),
        );
        let m = compute_metrics(&log, &PlantKind::Generic).unwrap();
        assert_eq!(m.min_h, vec![5.0]);
        assert!(!m.collision);
        assert_eq!(m.infeasible_step_count, 0);
        assert_eq!(m.first_infeasible_time, None);
    }

    #[test]
    fn infeasible_from_step_forty() {
        let rows = (0..1000)
            .map(|i| {
                row(
                    i,
                    [0.0; 4],
                    1.0,
                    if i >= 40 {
                        Status::Infeasible
                    } else {
                        Status::Optimal
                    },
                )
            })
            .collect();
        let m = compute_metrics(&log_with(rows), &PlantKind::Generic).unwrap();
        assert!((m.first_infeasible_time.unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(m.infeasible_step_count, 960);
    }

    #[test]
    fn grazing_obstacle_counts_as_collision() {
        let params = DoubleIntegratorParams::setting_a();
        let kind = params.plant().unwrap().kind;
        let rows = vec![
            row(0, [0.0, 4.0, 0.0, 0.0], 1.0, Status::Optimal),
            row(1, [5.0, 1.01, 0.0, 0.0], 1.0, Status::Optimal),
        ];
        let m = compute_metrics(&log_with(rows), &kind).unwrap();
        assert!(m.collision);
        assert!((m.min_clearance[0] + 0.01).abs() < 1e-12);
        assert_eq!(m.first_collision_time, Some(0.02));
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(compute_metrics(&log_with(Vec::new()), &PlantKind::Generic).is_err());
    }
}
