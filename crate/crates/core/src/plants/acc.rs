//! Adaptive cruise control: state `s = [p, v, z]` (position, speed, gap to
//! the lead vehicle), input is wheel force.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frameworks::{CertificateSet, FrameworkConfig, Method};
use crate::system::{Certificate, ControlAffineSystem, InputPolytope};

use super::{Plant, PlantKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccParams {
    pub m: f64,
    pub grav: f64,
    pub t_h: f64,
    /// Lead vehicle speed.
    pub v0: f64,
    pub v_d: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub c_a: f64,
    pub c_d: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Input weight (scalar `H`).
    pub h: f64,
    pub p: f64,
    pub omega0: f64,
    pub p_omega: f64,
    pub s0: [f64; 3],
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            m: 1650.0,
            grav: 9.81,
            t_h: 1.8,
            v0: 14.0,
            v_d: 10.0,
            f0: 0.1,
            f1: 5.0,
            f2: 0.25,
            c_a: 0.3,
            c_d: 0.3,
            lambda: 5.0,
            gamma: 5.0,
            h: 2.0 / (1650.0 * 1650.0),
            p: 2e-3,
            omega0: 1.0,
            p_omega: 0.2,
            s0: [0.0, 20.0, 100.0],
        }
    }
}

impl AccParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("grav", self.grav),
            ("t_h", self.t_h),
            ("c_a", self.c_a),
            ("c_d", self.c_d),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("h", self.h),
            ("p", self.p),
            ("omega0", self.omega0),
            ("p_omega", self.p_omega),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!(
                    "acc parameter `{name}` must be positive, got {v}"
                )));
            }
        }
        let finite = [self.v0, self.v_d, self.f0, self.f1, self.f2];
        if finite.iter().chain(&self.s0).any(|v| !v.is_finite()) {
            return Err(Error::Validation("acc parameters must be finite".into()));
        }
        Ok(())
    }

    /// Rolling resistance `F_r(v) = f₀ + f₁v + f₂v²`.
    pub fn friction(&self, v: f64) -> f64 {
        self.f0 + self.f1 * v + self.f2 * v * v
    }

    /// `(−m c_d g, m c_a g)`.
    pub fn input_bounds(&self) -> (f64, f64) {
        (
            -self.m * self.c_d * self.grav,
            self.m * self.c_a * self.grav,
        )
    }

    /// Base framework settings (method hard; callers switch it).
    pub fn framework_config(&self, method: Method) -> FrameworkConfig {
        FrameworkConfig {
            p: self.p,
            p_omega: self.p_omega,
            omega0: self.omega0,
            ..FrameworkConfig::new(method, DMatrix::from_element(1, 1, self.h))
        }
    }

    pub fn plant(&self) -> Result<Plant> {
        let (clf, cbf) = acc_certificates(self)?;
        Ok(Plant {
            system: acc_system(self)?,
            certificates: CertificateSet::new(clf, vec![cbf])?,
            x0: DVector::from_row_slice(&self.s0),
            kind: PlantKind::Acc {
                desired_velocity: self.v_d,
            },
        })
    }
}

/// `ṡ = [v, −F_r(v)/m, v₀ − v] + [0, 1/m, 0]·u` with `k(s) = F_r(v)`.
pub fn acc_system(params: &AccParams) -> Result<ControlAffineSystem> {
    params.validate()?;
    let (lo, hi) = params.input_bounds();
    let drift_p = params.clone();
    let nominal_p = params.clone();
    let inv_m = 1.0 / params.m;
    ControlAffineSystem::new(
        3,
        1,
        Arc::new(move |s: &DVector<f64>| {
            let v = s[1];
            DVector::from_vec(vec![v, -drift_p.friction(v) / drift_p.m, drift_p.v0 - v])
        }),
        Arc::new(move |_s: &DVector<f64>| DMatrix::from_column_slice(3, 1, &[0.0, inv_m, 0.0])),
        InputPolytope::boxed(&[lo], &[hi])?,
        Arc::new(move |s: &DVector<f64>| DVector::from_element(1, nominal_p.friction(s[1]))),
    )
}

/// `V = (v − v_d)²` and `h = z − T_h v − (v − v₀)²/(2 c_d g)`.
pub fn acc_certificates(params: &AccParams) -> Result<(Certificate, Certificate)> {
    params.validate()?;
    let v_d = params.v_d;
    let clf = Certificate::lyapunov(
        "V",
        params.lambda,
        Arc::new(move |s: &DVector<f64>| (s[1] - v_d).powi(2)),
        Arc::new(move |s: &DVector<f64>| DVector::from_vec(vec![0.0, 2.0 * (s[1] - v_d), 0.0])),
    )?;
    let (t_h, v0, cdg) = (params.t_h, params.v0, params.c_d * params.grav);
    let cbf = Certificate::barrier(
        "h",
        params.gamma,
        Arc::new(move |s: &DVector<f64>| s[2] - t_h * s[1] - (s[1] - v0).powi(2) / (2.0 * cdg)),
        Arc::new(move |s: &DVector<f64>| {
            DVector::from_vec(vec![0.0, -t_h - (s[1] - v0) / cdg, 1.0])
        }),
    )?;
    Ok((clf, cbf))
}
