//! Single-QP frameworks: hard, CLF-CBF QP, optimal-decay, unified and
//! limit-weight.
//!
//! Each public solver takes one barrier; the `pub(crate)` variants accept any
//! number and are used by [`super::control_step`].

use nalgebra::DVector;

use crate::error::Result;
use crate::system::{
    build_constraint_row, build_constraint_row_with_rate, Certificate, ControlAffineSystem,
};

use super::builder::{SlackTerm, StageBuilder};
use super::{ControlResult, FrameworkConfig, Method, SlackDomain};

/// `|h(x)|` below which optimal-decay falls back to the CLF-CBF QP form.
pub const HEIGHT_ZERO_TOL: f64 = 1e-10;

/// Minimizes `½(u−k)ᵀH(u−k)` with both certificate rows hard.
pub fn solve_hard(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbf: &Certificate,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    hard(sys, clf, std::slice::from_ref(cbf), cfg, x)
}

/// Minimizes `½(u−k)ᵀH(u−k) + pδ²` with a slacked CLF row and hard CBF rows.
pub fn solve_clf_cbf_qp(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbf: &Certificate,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    clf_cbf_qp(
        sys,
        clf,
        std::slice::from_ref(cbf),
        cfg,
        x,
        Method::ClfCbfQp,
    )
}

/// Minimizes `½(u−k)ᵀH(u−k) + pδ² + p_ω(ω−ω₀)²` with CBF row
/// `L_fh + L_gh·u + ωγ₀h ≥ 0`.
pub fn solve_optimal_decay(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbf: &Certificate,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    optimal_decay(sys, clf, std::slice::from_ref(cbf), cfg, x)
}

/// Minimizes `½(u−k)ᵀH(u−k) + ½ΔᵀH_ΔΔ` over `Δ = (δ₁, δ₂)` restricted to the
/// configured slack domain.
pub fn solve_unified(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbf: &Certificate,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    unified(sys, clf, std::slice::from_ref(cbf), cfg, x)
}

/// Minimizes `(u−k)ᵀH(u−k) + qδ₁² + q²δ₂²`, solved after dividing by `q²`.
pub fn solve_limit_weight(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbf: &Certificate,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    limit_weight(sys, clf, std::slice::from_ref(cbf), cfg, x)
}

fn base(
    sys: &ControlAffineSystem,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
    extra: usize,
) -> Result<StageBuilder> {
    cfg.validate(sys.input_dim())?;
    let k = sys.nominal(x)?;
    let mut stage = StageBuilder::new(&k, extra);
    stage.input_polytope(sys.input_polytope());
    Ok(stage)
}

fn finish(
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
    stage: &StageBuilder,
    method: Method,
    barriers: usize,
    slacks: impl FnOnce(&super::builder::StageOutcome) -> (f64, Vec<f64>, Option<Vec<f64>>),
) -> Result<ControlResult> {
    let out = stage.solve(method.name())?;
    if !out.is_optimal() {
        return ControlResult::infeasible(sys, x, barriers, method, vec![out.diagnostics]);
    }
    let (delta1, delta2, omega) = slacks(&out);
    Ok(ControlResult {
        u: out.input(),
        delta1,
        delta2,
        omega,
        status: out.solution.status,
        stages: vec![out.diagnostics],
        method,
    })
}

pub(crate) fn hard(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbfs: &[Certificate],
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    let mut stage = base(sys, cfg, x, 0)?;
    stage.input_cost(&cfg.input_weight, 1.0);
    stage.certificate_row(&build_constraint_row(clf, sys, x, None)?, SlackTerm::Zero);
    for cbf in cbfs {
        stage.certificate_row(&build_constraint_row(cbf, sys, x, None)?, SlackTerm::Zero);
    }
    finish(sys, x, &stage, Method::Hard, cbfs.len(), |_| {
        (0.0, vec![0.0; cbfs.len()], None)
    })
}

pub(crate) fn clf_cbf_qp(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbfs: &[Certificate],
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
    method: Method,
) -> Result<ControlResult> {
    let mut stage = base(sys, cfg, x, 1)?;
    stage
        .input_cost(&cfg.input_weight, 1.0)
        .extra_cost(0, 2.0 * cfg.p, 0.0)
        .certificate_row(
            &build_constraint_row(clf, sys, x, Some(0))?,
            SlackTerm::Var {
                index: 0,
                scale: 1.0,
            },
        );
    for cbf in cbfs {
        stage.certificate_row(&build_constraint_row(cbf, sys, x, None)?, SlackTerm::Zero);
    }
    finish(sys, x, &stage, method, cbfs.len(), |out| {
        (out.extra(0), vec![0.0; cbfs.len()], None)
    })
}

pub(crate) fn optimal_decay(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbfs: &[Certificate],
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    cfg.validate(sys.input_dim())?;
    let heights: Vec<f64> = cbfs.iter().map(|c| c.value(x)).collect();
    if heights.iter().all(|h| h.abs() < HEIGHT_ZERO_TOL) {
        let mut res = clf_cbf_qp(sys, clf, cbfs, cfg, x, Method::OptimalDecay)?;
        if res.is_optimal() {
            res.omega = Some(vec![cfg.omega0; cbfs.len()]);
        }
        return Ok(res);
    }

    // Extras: δ, then θⱼ = ωⱼ − ω₀ per barrier, so regularization pulls
    // toward ω₀. A barrier sitting exactly on h = 0 keeps θ only in the
    // cost, which pins it at zero.
    let mut stage = base(sys, cfg, x, 1 + cbfs.len())?;
    stage
        .input_cost(&cfg.input_weight, 1.0)
        .extra_cost(0, 2.0 * cfg.p, 0.0)
        .certificate_row(
            &build_constraint_row(clf, sys, x, Some(0))?,
            SlackTerm::Var {
                index: 0,
                scale: 1.0,
            },
        );
    let mut gamma_h = Vec::with_capacity(cbfs.len());
    for (j, cbf) in cbfs.iter().enumerate() {
        let gamma0 = cfg.gamma0_for(cbf.decay_rate());
        let g0h = gamma0 * heights[j];
        gamma_h.push(g0h);
        stage.extra_cost(1 + j, 2.0 * cfg.p_omega, 0.0);
        // L_fh + L_gh·u + γ₀ω₀h ≥ δ with δ = −γ₀h·θ.
        let row = build_constraint_row_with_rate(cbf, gamma0 * cfg.omega0, sys, x, Some(1 + j))?;
        let slack = if heights[j].abs() < HEIGHT_ZERO_TOL {
            SlackTerm::Zero
        } else {
            SlackTerm::Var {
                index: 1 + j,
                scale: -g0h,
            }
        };
        stage.certificate_row(&row, slack);
    }
    let omega0 = cfg.omega0;
    finish(sys, x, &stage, Method::OptimalDecay, cbfs.len(), |out| {
        let theta: Vec<f64> = (0..gamma_h.len())
            .map(|j| {
                if heights[j].abs() < HEIGHT_ZERO_TOL {
                    0.0
                } else {
                    out.extra(1 + j)
                }
            })
            .collect();
        let delta2 = theta
            .iter()
            .zip(&gamma_h)
            .map(|(t, g0h)| -t * g0h)
            .collect();
        let omega = theta.iter().map(|t| omega0 + t).collect();
        (out.extra(0), delta2, Some(omega))
    })
}

pub(crate) fn unified(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbfs: &[Certificate],
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    let mut stage = base(sys, cfg, x, 1 + cbfs.len())?;
    stage.input_cost(&cfg.input_weight, 1.0);
    let slack = |domain: SlackDomain, index: usize| match domain {
        SlackDomain::Free => SlackTerm::Var { index, scale: 1.0 },
        SlackDomain::Zero => SlackTerm::Zero,
    };
    // Pinned slacks stay in the cost only, so their optimum is exactly zero.
    stage
        .extra_cost(0, cfg.slack_weights[0], 0.0)
        .certificate_row(
            &build_constraint_row(clf, sys, x, Some(0))?,
            slack(cfg.slack_domain[0], 0),
        );
    for (j, cbf) in cbfs.iter().enumerate() {
        stage
            .extra_cost(1 + j, cfg.slack_weights[1], 0.0)
            .certificate_row(
                &build_constraint_row(cbf, sys, x, Some(1 + j))?,
                slack(cfg.slack_domain[1], 1 + j),
            );
    }
    let domain = cfg.slack_domain;
    finish(sys, x, &stage, Method::Unified, cbfs.len(), |out| {
        let value = |d: SlackDomain, i: usize| {
            if d == SlackDomain::Zero {
                0.0
            } else {
                out.extra(i)
            }
        };
        let delta2 = (0..cbfs.len()).map(|j| value(domain[1], 1 + j)).collect();
        (value(domain[0], 0), delta2, None)
    })
}

pub(crate) fn limit_weight(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbfs: &[Certificate],
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    let q = cfg.q;
    let mut stage = base(sys, cfg, x, 1 + cbfs.len())?;
    stage
        .input_cost(&(&cfg.input_weight * 2.0), 1.0 / (q * q))
        .extra_cost(0, 2.0 / q, 0.0)
        .certificate_row(
            &build_constraint_row(clf, sys, x, Some(0))?,
            SlackTerm::Var {
                index: 0,
                scale: 1.0,
            },
        );
    for (j, cbf) in cbfs.iter().enumerate() {
        stage.extra_cost(1 + j, 2.0, 0.0).certificate_row(
            &build_constraint_row(cbf, sys, x, Some(1 + j))?,
            SlackTerm::Var {
                index: 1 + j,
                scale: 1.0,
            },
        );
    }
    finish(sys, x, &stage, Method::LimitWeight, cbfs.len(), |out| {
        (
            out.extra(0),
            (0..cbfs.len()).map(|j| out.extra(1 + j)).collect(),
            None,
        )
    })
}
