//! Benchmark plants: adaptive cruise control and a planar double integrator.

pub mod acc;
pub mod care;
pub mod double_integrator;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::frameworks::CertificateSet;
use crate::system::ControlAffineSystem;

pub use acc::{acc_certificates, acc_system, AccParams};
pub use care::{care_residual, lyapunov, solve_care};
pub use double_integrator::{
    di_certificates, di_system, linear_model, DoubleIntegratorParams, NominalController, Obstacle,
};

/// What a run's states mean, for collision and goal checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlantKind {
    Generic,
    /// State `[p, v, z]`; collision when `z ≤ 0`.
    Acc {
        desired_velocity: f64,
    },
    /// State `[x, y, vx, vy]`; collision when strictly inside an obstacle.
    DoubleIntegrator {
        goal: [f64; 2],
        obstacles: Vec<Obstacle>,
    },
}

impl PlantKind {
    pub fn collided(&self, x: &DVector<f64>) -> bool {
        match self {
            PlantKind::Generic => false,
            PlantKind::Acc { .. } => x[2] <= 0.0,
            PlantKind::DoubleIntegrator { obstacles, .. } => obstacles
                .iter()
                .any(|o| o.distance([x[0], x[1]]) < o.radius),
        }
    }

    /// Within `tol` of the goal in position and at speed at most `tol`.
    pub fn at_goal(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            PlantKind::DoubleIntegrator { goal, .. } => {
                (x[0] - goal[0]).hypot(x[1] - goal[1]) <= tol && x[2].hypot(x[3]) <= tol
            }
            _ => false,
        }
    }
}

/// A plant ready to simulate.
#[derive(Debug, Clone)]
pub struct Plant {
    pub system: ControlAffineSystem,
    pub certificates: CertificateSet,
    pub x0: DVector<f64>,
    pub kind: PlantKind,
}
