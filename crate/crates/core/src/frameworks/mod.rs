//! CLF-CBF QP control frameworks.
//!
//! Every solver maps one state to one [`ControlResult`]. The single-step QPs
//! ([`solve_hard`], [`solve_clf_cbf_qp`], [`solve_optimal_decay`],
//! [`solve_unified`], [`solve_limit_weight`]) trade objectives through weights;
//! [`solve_safety_first`] and [`solve_priority_list`] instead solve a cascade
//! where each level's slacks are minimized and frozen before the next level.

mod baseline;
mod builder;
mod hierarchy;
mod standard;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::{QpSolution, Status};
use crate::system::{Certificate, CertificateKind, ControlAffineSystem};

pub use baseline::{
    solve_clf_cbf_qp, solve_hard, solve_limit_weight, solve_optimal_decay, solve_unified,
    HEIGHT_ZERO_TOL,
};
pub use hierarchy::{
    priority_by_barrier_value, solve_priority_list, solve_safety_first, PriorityEntry, PriorityList,
};
pub use standard::{standardize, StandardizedProblem};

/// Curvature of the pull toward `k(x)` in cascade stages that otherwise
/// leave `u` free. Scaled by `H`.
pub const STAGE_PULL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Hard,
    ClfCbfQp,
    OptimalDecay,
    SafetyFirst,
    Unified,
    LimitWeight,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Hard,
        Method::ClfCbfQp,
        Method::OptimalDecay,
        Method::SafetyFirst,
        Method::Unified,
        Method::LimitWeight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hard => "hard",
            Method::ClfCbfQp => "clf-cbf-qp",
            Method::OptimalDecay => "optimal-decay",
            Method::SafetyFirst => "safety-first",
            Method::Unified => "unified",
            Method::LimitWeight => "limit-weight",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown method `{s}`")))
    }
}

/// Per-slack domain of the unified form: the slack is free or pinned at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlackDomain {
    Free,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkConfig {
    pub method: Method,
    /// Input weight `H` (symmetric positive definite, `m × m`).
    pub input_weight: DMatrix<f64>,
    /// CLF slack weight.
    pub p: f64,
    /// Decay-multiplier weight (optimal-decay).
    pub p_omega: f64,
    /// Nominal decay multiplier (optimal-decay).
    pub omega0: f64,
    /// Base CBF rate for optimal-decay; `None` means `γ/ω₀`.
    pub gamma0: Option<f64>,
    /// Limit weight.
    pub q: f64,
    /// `(δ₁, δ₂)` domains for the unified form.
    pub slack_domain: [SlackDomain; 2],
    /// Diagonal of `H_Δ` for the unified form.
    pub slack_weights: [f64; 2],
}

impl FrameworkConfig {
    pub fn new(method: Method, input_weight: DMatrix<f64>) -> Self {
        Self {
            method,
            input_weight,
            p: 1.0,
            p_omega: 1.0,
            omega0: 1.0,
            gamma0: None,
            q: 1e8,
            slack_domain: [SlackDomain::Free, SlackDomain::Zero],
            slack_weights: [2.0, 2.0],
        }
    }

    pub fn with_method(&self, method: Method) -> Self {
        Self {
            method,
            ..self.clone()
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        let h = &self.input_weight;
        if h.nrows() != input_dim || h.ncols() != input_dim {
            return Err(Error::DimensionMismatch {
                what: "input weight",
                expected: input_dim,
                got: h.nrows(),
            });
        }
        if (h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::Validation("input weight H must be symmetric".into()));
        }
        if h.clone().cholesky().is_none() {
            return Err(Error::Validation(
                "input weight H must be positive definite".into(),
            ));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        match self.method {
            Method::ClfCbfQp => positive("p", self.p)?,
            Method::OptimalDecay => {
                positive("p", self.p)?;
                positive("p_omega", self.p_omega)?;
                positive("omega0", self.omega0)?;
                if let Some(g) = self.gamma0 {
                    positive("gamma0", g)?;
                }
            }
            Method::LimitWeight => positive("q", self.q)?,
            Method::Unified => {
                positive("slack weight 1", self.slack_weights[0])?;
                positive("slack weight 2", self.slack_weights[1])?;
            }
            Method::Hard | Method::SafetyFirst => {}
        }
        Ok(())
    }

    /// `γ₀` for a barrier with rate `γ`.
    pub fn gamma0_for(&self, barrier_rate: f64) -> f64 {
        self.gamma0.unwrap_or(barrier_rate / self.omega0)
    }

    /// Unified-form settings reproducing `self.method` at a state with barrier
    /// value `h` (slack domains and `H_Δ` of the equivalence table).
    pub fn unified_equivalent(&self, h: f64, barrier_rate: f64) -> Result<FrameworkConfig> {
        let (slack_domain, slack_weights) = match self.method {
            Method::Hard => ([SlackDomain::Zero, SlackDomain::Zero], [2.0, 2.0]),
            Method::ClfCbfQp => ([SlackDomain::Free, SlackDomain::Zero], [2.0 * self.p, 2.0]),
            Method::OptimalDecay if h.abs() < HEIGHT_ZERO_TOL => {
                ([SlackDomain::Free, SlackDomain::Zero], [2.0 * self.p, 2.0])
            }
            Method::OptimalDecay => {
                let g0h = self.gamma0_for(barrier_rate) * h;
                (
                    [SlackDomain::Free, SlackDomain::Free],
                    [2.0 * self.p, 2.0 * self.p_omega / (g0h * g0h)],
                )
            }
            other => {
                return Err(Error::Validation(format!(
                    "method {other} has no unified-form equivalent"
                )))
            }
        };
        Ok(FrameworkConfig {
            method: Method::Unified,
            slack_domain,
            slack_weights,
            ..self.clone()
        })
    }
}

/// Objective value and active set of one QP stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDiagnostics {
    pub label: String,
    pub status: Status,
    pub objective: f64,
    pub active_set: Vec<usize>,
    pub phase_one_violation: f64,
}

impl StageDiagnostics {
    fn skipped(label: &str) -> Self {
        Self {
            label: label.to_string(),
            status: Status::Optimal,
            objective: 0.0,
            active_set: Vec::new(),
            phase_one_violation: 0.0,
        }
    }
}

/// Outcome of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    /// Input to apply. When `status` is `Infeasible` this is the projection of
    /// `k(x)` onto the input set.
    pub u: DVector<f64>,
    /// CLF slack `δ₁` (zero for methods without one).
    pub delta1: f64,
    /// Per-barrier CBF slack `δ₂`, in the convention `L_fh + L_gh·u + γh ≥ δ₂`.
    pub delta2: Vec<f64>,
    /// Per-barrier decay multipliers (optimal-decay only).
    pub omega: Option<Vec<f64>>,
    pub status: Status,
    pub stages: Vec<StageDiagnostics>,
    pub method: Method,
}

impl ControlResult {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    fn infeasible(
        sys: &ControlAffineSystem,
        x: &DVector<f64>,
        barriers: usize,
        method: Method,
        stages: Vec<StageDiagnostics>,
    ) -> Result<Self> {
        Ok(Self {
            u: project_nominal(sys, x)?,
            delta1: f64::NAN,
            delta2: vec![f64::NAN; barriers],
            omega: None,
            status: Status::Infeasible,
            stages,
            method,
        })
    }
}

/// Euclidean projection of `k(x)` onto the input polytope.
pub fn project_nominal(sys: &ControlAffineSystem, x: &DVector<f64>) -> Result<DVector<f64>> {
    let k = sys.nominal(x)?;
    let poly = sys.input_polytope();
    if poly.contains(&k, 0.0) {
        return Ok(k);
    }
    let mut stage = builder::StageBuilder::new(&k, 0);
    stage
        .input_cost(&DMatrix::identity(k.len(), k.len()), 1.0)
        .input_polytope(poly);
    let out = stage.solve("projection")?;
    if !out.is_optimal() {
        return Err(Error::Numerical("input polytope became infeasible".into()));
    }
    Ok(out.input())
}

/// A CLF together with any number of CBFs.
#[derive(Debug, Clone)]
pub struct CertificateSet {
    pub clf: Certificate,
    pub barriers: Vec<Certificate>,
}

impl CertificateSet {
    pub fn new(clf: Certificate, barriers: Vec<Certificate>) -> Result<Self> {
        if clf.kind() != CertificateKind::Lyapunov {
            return Err(Error::Validation(format!(
                "`{}` is not a Lyapunov certificate",
                clf.label()
            )));
        }
        if let Some(b) = barriers
            .iter()
            .find(|b| b.kind() != CertificateKind::Barrier)
        {
            return Err(Error::Validation(format!(
                "`{}` is not a barrier certificate",
                b.label()
            )));
        }
        if barriers.is_empty() {
            return Err(Error::Validation("at least one barrier is required".into()));
        }
        Ok(Self { clf, barriers })
    }
}

/// One control step with whatever method `cfg` selects.
///
/// With several barriers the single-QP methods treat every barrier alike
/// (one slack or decay multiplier each). Safety-first runs the priority
/// cascade with one barrier per level, ordered by ascending barrier value at
/// `x`, and the CLF on the lowest level.
pub fn control_step(
    sys: &ControlAffineSystem,
    certs: &CertificateSet,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    let (clf, cbfs) = (&certs.clf, certs.barriers.as_slice());
    match cfg.method {
        Method::Hard => baseline::hard(sys, clf, cbfs, cfg, x),
        Method::ClfCbfQp => baseline::clf_cbf_qp(sys, clf, cbfs, cfg, x, Method::ClfCbfQp),
        Method::OptimalDecay => baseline::optimal_decay(sys, clf, cbfs, cfg, x),
        Method::Unified => baseline::unified(sys, clf, cbfs, cfg, x),
        Method::LimitWeight => baseline::limit_weight(sys, clf, cbfs, cfg, x),
        Method::SafetyFirst if cbfs.len() == 1 => solve_safety_first(sys, clf, &cbfs[0], cfg, x),
        Method::SafetyFirst => {
            let mut all = Vec::with_capacity(cbfs.len() + 1);
            all.push(clf.clone());
            all.extend(cbfs.iter().cloned());
            let plist = priority_by_barrier_value(&all, x)?;
            solve_priority_list(sys, &all, &plist, cfg, x)
        }
    }
}

pub(crate) fn stage_error(label: &str, solution: &QpSolution) -> Error {
    Error::Numerical(format!(
        "{label} reported infeasible (phase-I violation {:e}) although it is feasible by construction",
        solution.phase_one_violation
    ))
}
