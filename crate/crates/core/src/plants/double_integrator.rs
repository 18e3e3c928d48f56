//! Planar double integrator `s = [x, y, vx, vy]` with circular obstacles.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frameworks::{CertificateSet, FrameworkConfig, Method};
use crate::system::{Certificate, ControlAffineSystem, InputPolytope};

use super::care::solve_care;
use super::{Plant, PlantKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn distance(&self, pos: [f64; 2]) -> f64 {
        (pos[0] - self.center[0]).hypot(pos[1] - self.center[1])
    }
}

/// Nominal controller `k(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NominalController {
    Zero,
    /// `−R⁻¹BᵀP(s − s_d)`.
    Lqr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoubleIntegratorParams {
    pub s0: [f64; 4],
    pub p_d: [f64; 2],
    pub obstacles: Vec<Obstacle>,
    pub lambda: f64,
    pub gamma: f64,
    /// Input weight `H` (row-major 2×2).
    pub h: [[f64; 2]; 2],
    pub p: f64,
    pub omega0: f64,
    pub p_omega: f64,
    /// Symmetric per-axis input bound.
    pub u_max: f64,
    pub lqr_q: [[f64; 4]; 4],
    pub lqr_r: [[f64; 2]; 2],
    pub nominal: NominalController,
}

impl Default for DoubleIntegratorParams {
    fn default() -> Self {
        Self::setting_a()
    }
}

fn identity<const N: usize>(scale: f64) -> [[f64; N]; N] {
    let mut m = [[0.0; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = scale;
    }
    m
}

fn to_matrix<const N: usize>(m: &[[f64; N]; N]) -> DMatrix<f64> {
    DMatrix::from_fn(N, N, |i, j| m[i][j])
}

impl DoubleIntegratorParams {
    /// Single obstacle, `p = 1`, `p_ω = 10`.
    pub fn setting_a() -> Self {
        Self {
            s0: [0.0, 4.0, 0.0, 0.0],
            p_d: [10.0, 0.0],
            obstacles: vec![Obstacle::new([5.0, 3.0], 2.0)],
            lambda: 1.0,
            gamma: 3.0,
            h: identity(5.0),
            p: 1.0,
            omega0: 1.0,
            p_omega: 10.0,
            u_max: 7.0,
            lqr_q: identity(1.0),
            lqr_r: identity(1.0),
            nominal: NominalController::Zero,
        }
    }

    /// Single obstacle, `p = 0.01`, `p_ω = 1`.
    pub fn setting_b() -> Self {
        Self {
            p: 0.01,
            p_omega: 1.0,
            ..Self::setting_a()
        }
    }

    /// Six obstacles, otherwise setting A.
    pub fn multi_obstacle() -> Self {
        Self {
            obstacles: vec![
                Obstacle::new([5.0, 3.0], 1.0),
                Obstacle::new([4.0, 1.0], 1.0),
                Obstacle::new([9.0, 1.0], 1.0),
                Obstacle::new([1.0, 4.0], 0.5),
                Obstacle::new([3.0, 3.0], 0.5),
                Obstacle::new([6.0, 1.0], 0.3),
            ],
            ..Self::setting_a()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.obstacles.is_empty() {
            return Err(Error::Validation(
                "at least one obstacle is required".into(),
            ));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0 && o.radius.is_finite()) || o.center.iter().any(|c| !c.is_finite())
            {
                return Err(Error::Validation(format!(
                    "obstacle {} needs a positive radius and finite center",
                    i + 1
                )));
            }
        }
        let positive = [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("p", self.p),
            ("omega0", self.omega0),
            ("p_omega", self.p_omega),
            ("u_max", self.u_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!(
                    "double-integrator parameter `{name}` must be positive, got {v}"
                )));
            }
        }
        if self.s0.iter().chain(&self.p_d).any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "initial state and goal must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn goal_state(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.p_d[0], self.p_d[1], 0.0, 0.0])
    }

    pub fn input_weight(&self) -> DMatrix<f64> {
        to_matrix(&self.h)
    }

    pub fn framework_config(&self, method: Method) -> FrameworkConfig {
        FrameworkConfig {
            p: self.p,
            p_omega: self.p_omega,
            omega0: self.omega0,
            ..FrameworkConfig::new(method, self.input_weight())
        }
    }

    /// LQR value matrix `P` for the CLF.
    pub fn lqr_value(&self) -> Result<DMatrix<f64>> {
        let (a, b) = linear_model();
        solve_care(&a, &b, &to_matrix(&self.lqr_q), &to_matrix(&self.lqr_r))
    }

    pub fn plant(&self) -> Result<Plant> {
        let (clf, cbfs) = di_certificates(self)?;
        Ok(Plant {
            system: di_system(self)?,
            certificates: CertificateSet::new(clf, cbfs)?,
            x0: DVector::from_row_slice(&self.s0),
            kind: PlantKind::DoubleIntegrator {
                goal: self.p_d,
                obstacles: self.obstacles.clone(),
            },
        })
    }
}

/// `(A, B)` of `ṡ = As + Bu`.
pub fn linear_model() -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    let mut b = DMatrix::zeros(4, 2);
    b[(2, 0)] = 1.0;
    b[(3, 1)] = 1.0;
    (a, b)
}

pub fn di_system(params: &DoubleIntegratorParams) -> Result<ControlAffineSystem> {
    params.validate()?;
    let (_, b) = linear_model();
    let u = params.u_max;
    let nominal: crate::system::VectorField = match params.nominal {
        NominalController::Zero => Arc::new(|_s: &DVector<f64>| DVector::zeros(2)),
        NominalController::Lqr => {
            let r = to_matrix(&params.lqr_r);
            let gain = r
                .cholesky()
                .ok_or_else(|| Error::Validation("lqr_r must be positive definite".into()))?
                .solve(&(b.transpose() * params.lqr_value()?));
            let goal = params.goal_state();
            Arc::new(move |s: &DVector<f64>| -(&gain * (s - &goal)))
        }
    };
    ControlAffineSystem::new(
        4,
        2,
        Arc::new(|s: &DVector<f64>| DVector::from_vec(vec![s[2], s[3], 0.0, 0.0])),
        Arc::new(move |_s: &DVector<f64>| b.clone()),
        InputPolytope::boxed(&[-u, -u], &[u, u])?,
        nominal,
    )
}

/// LQR CLF `V = (s − s_d)ᵀP(s − s_d)` and one barrier per obstacle,
/// `hᵢ = ‖p − pᵢ‖² − ρᵢ² + 2(p − pᵢ)ᵀv`.
pub fn di_certificates(params: &DoubleIntegratorParams) -> Result<(Certificate, Vec<Certificate>)> {
    params.validate()?;
    let p = params.lqr_value()?;
    let goal = params.goal_state();
    let (p_v, goal_v) = (p.clone(), goal.clone());
    let clf = Certificate::lyapunov(
        "V",
        params.lambda,
        Arc::new(move |s: &DVector<f64>| {
            let e = s - &goal_v;
            e.dot(&(&p_v * &e))
        }),
        Arc::new(move |s: &DVector<f64>| 2.0 * (&p * (s - &goal))),
    )?;
    let cbfs = params
        .obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (c, rho) = (o.center, o.radius);
            Certificate::barrier(
                format!("h{}", i + 1),
                params.gamma,
                Arc::new(move |s: &DVector<f64>| {
                    let (dx, dy) = (s[0] - c[0], s[1] - c[1]);
                    dx * dx + dy * dy - rho * rho + 2.0 * (dx * s[2] + dy * s[3])
                }),
                Arc::new(move |s: &DVector<f64>| {
                    let (dx, dy) = (s[0] - c[0], s[1] - c[1]);
                    DVector::from_vec(vec![
                        2.0 * dx + 2.0 * s[2],
                        2.0 * dy + 2.0 * s[3],
                        2.0 * dx,
                        2.0 * dy,
                    ])
                }),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((clf, cbfs))
}
