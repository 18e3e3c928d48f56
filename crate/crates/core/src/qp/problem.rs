use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Relative tolerance used when checking that a Hessian is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense convex QP: minimize `½ xᵀHx + fᵀx` subject to `Ax ≤ b`.
///
/// The Hessian may be positive semidefinite; the solver adds a small ridge
/// before factoring (see [`super::solve_qp`]).
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear_cost: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        hessian: DMatrix<f64>,
        linear_cost: DVector<f64>,
        ineq_matrix: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
    ) -> Result<Self> {
        let problem = Self {
            hessian,
            linear_cost,
            ineq_matrix,
            ineq_rhs,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Problem without inequality constraints.
    pub fn unconstrained(hessian: DMatrix<f64>, linear_cost: DVector<f64>) -> Result<Self> {
        let n = linear_cost.len();
        Self::new(
            hessian,
            linear_cost,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.linear_cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.ineq_rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.linear_cost.len();
        if n == 0 {
            return Err(Error::Validation("QP needs at least one variable".into()));
        }
        check_dim("hessian rows", n, self.hessian.nrows())?;
        check_dim("hessian cols", n, self.hessian.ncols())?;
        check_dim("ineq_matrix cols", n, self.ineq_matrix.ncols())?;
        check_dim("ineq_rhs", self.ineq_matrix.nrows(), self.ineq_rhs.len())?;

        let all_finite = self.hessian.iter().all(|v| v.is_finite())
            && self.linear_cost.iter().all(|v| v.is_finite())
            && self.ineq_matrix.iter().all(|v| v.is_finite())
            && self.ineq_rhs.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Validation(
                "QP data contains non-finite entries".into(),
            ));
        }

        let scale = 1.0 + self.hessian.amax();
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (self.hessian[(i, j)] - self.hessian[(j, i)]).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(Error::Validation(format!(
                        "hessian not symmetric at ({i}, {j}): |H_ij - H_ji| = {gap:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear_cost.dot(x)
    }

    /// Largest constraint violation `max(0, max_i aᵢᵀx − bᵢ)`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        max_violation(&self.ineq_matrix, &self.ineq_rhs, x)
    }
}

pub(crate) fn max_violation(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    (a * x - b).iter().fold(0.0_f64, |acc, &r| acc.max(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
}

impl Status {
    pub fn is_optimal(self) -> bool {
        self == Status::Optimal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: Status,
    /// Present iff `status == Optimal`.
    pub x_opt: Option<DVector<f64>>,
    /// Objective of the caller's (unregularized) problem; `+inf` when infeasible.
    pub objective: f64,
    /// Constraints in the final working set, ascending.
    pub active_set: Vec<usize>,
    /// One multiplier per inequality row (zero off the active set).
    pub multipliers: DVector<f64>,
    /// KKT residual of the regularized problem actually solved.
    pub kkt_residual: f64,
    /// Constraint violation of the returned point (minimal violation when infeasible).
    pub max_violation: f64,
    /// Phase-I value: minimal total hinge violation of `Ax ≤ b`.
    pub phase_one_violation: f64,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status.is_optimal()
    }

    /// The minimizer; panics if the problem was infeasible.
    pub fn x(&self) -> &DVector<f64> {
        self.x_opt
            .as_ref()
            .expect("QpSolution::x called on an infeasible solution")
    }
}

/// `‖Hx + f + Aᵀμ‖∞` plus the worst of complementarity `|μᵢ(aᵢᵀx − bᵢ)|` and
/// primal violation `max(0, aᵢᵀx − bᵢ)`. Zero exactly at a KKT pair.
pub fn kkt_residual(
    problem: &QpProblem,
    x: &DVector<f64>,
    multipliers: &DVector<f64>,
) -> Result<f64> {
    check_dim("x", problem.num_vars(), x.len())?;
    check_dim("multipliers", problem.num_constraints(), multipliers.len())?;
    if let Some(bad) = multipliers.iter().position(|&m| m < 0.0) {
        return Err(Error::Validation(format!(
            "multiplier {bad} is negative ({})",
            multipliers[bad]
        )));
    }

    let mut grad = &problem.hessian * x + &problem.linear_cost;
    if problem.num_constraints() > 0 {
        grad += problem.ineq_matrix.transpose() * multipliers;
    }
    let stationarity = grad.amax();

    let mut worst = 0.0_f64;
    if problem.num_constraints() > 0 {
        let slack = &problem.ineq_matrix * x - &problem.ineq_rhs;
        for (s, mu) in slack.iter().zip(multipliers.iter()) {
            worst = worst.max((mu * s).abs()).max(s.max(0.0));
        }
    }
    Ok(stationarity + worst)
}
