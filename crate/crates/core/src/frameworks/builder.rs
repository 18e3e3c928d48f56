//! Assembles one QP over `(w, extra…)` where `w = u − k(x)`.
//!
//! Working in the offset variable makes every ridge or pull term in the
//! solver pull toward the nominal input rather than toward `u = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::qp::{solve_qp, QpProblem, QpSolution, Status};
use crate::system::{ConstraintRow, InputPolytope};

use super::StageDiagnostics;

/// How a constraint row's slack enters the stage.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SlackTerm {
    /// Slack pinned at zero.
    Zero,
    /// Slack pinned at a known value.
    Fixed(f64),
    /// Slack is extra variable `index` (0-based among the extras), multiplied by `scale`.
    Var { index: usize, scale: f64 },
}

pub(crate) struct StageBuilder {
    m: usize,
    extra: usize,
    nominal: DVector<f64>,
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    rows: Vec<(DVector<f64>, f64)>,
}

impl StageBuilder {
    pub fn new(nominal: &DVector<f64>, extra: usize) -> Self {
        let m = nominal.len();
        let n = m + extra;
        Self {
            m,
            extra,
            nominal: nominal.clone(),
            hessian: DMatrix::zeros(n, n),
            linear: DVector::zeros(n),
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.m + self.extra
    }

    /// Adds `scale·H` to the `w` block.
    pub fn input_cost(&mut self, weight: &DMatrix<f64>, scale: f64) -> &mut Self {
        let m = self.m;
        let mut block = self.hessian.view_mut((0, 0), (m, m));
        block += weight * scale;
        self
    }

    /// Adds `½·curvature·(z − center)²` on extra variable `index`.
    pub fn extra_cost(&mut self, index: usize, curvature: f64, center: f64) -> &mut Self {
        let j = self.m + index;
        self.hessian[(j, j)] += curvature;
        self.linear[j] -= curvature * center;
        self
    }

    /// `A(w + k) ≤ b`.
    pub fn input_polytope(&mut self, poly: &InputPolytope) -> &mut Self {
        let n = self.num_vars();
        let shifted = &poly.b - &poly.a * &self.nominal;
        for i in 0..poly.a.nrows() {
            let mut a = DVector::zeros(n);
            a.rows_mut(0, self.m).copy_from(&poly.a.row(i).transpose());
            self.rows.push((a, shifted[i]));
        }
        self
    }

    /// Certificate row with the given slack treatment.
    pub fn certificate_row(&mut self, row: &ConstraintRow, slack: SlackTerm) -> &mut Self {
        let n = self.num_vars();
        // a·u − s·δ ≤ rhs  ⇒  a·w − s·δ ≤ rhs − a·k
        let (a_u, s, rhs) = row.as_leq();
        let mut a = DVector::zeros(n);
        a.rows_mut(0, self.m).copy_from(&a_u);
        let mut rhs = rhs - a_u.dot(&self.nominal);
        match slack {
            SlackTerm::Zero => {}
            SlackTerm::Fixed(value) => rhs += s * value,
            SlackTerm::Var { index, scale } => a[self.m + index] = -s * scale,
        }
        self.rows.push((a, rhs));
        self
    }

    pub fn build(&self) -> Result<QpProblem> {
        let n = self.num_vars();
        let a = DMatrix::from_fn(self.rows.len(), n, |i, j| self.rows[i].0[j]);
        let b = DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.1));
        QpProblem::new(self.hessian.clone(), self.linear.clone(), a, b)
    }

    /// Constraint data only, for phase-I checks.
    pub fn constraints(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.num_vars();
        let a = DMatrix::from_fn(self.rows.len(), n, |i, j| self.rows[i].0[j]);
        let b = DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.1));
        (a, b)
    }

    pub fn solve(&self, label: &str) -> Result<StageOutcome> {
        let solution = solve_qp(&self.build()?)?;
        Ok(StageOutcome {
            diagnostics: StageDiagnostics {
                label: label.to_string(),
                status: solution.status,
                objective: solution.objective,
                active_set: solution.active_set.clone(),
                phase_one_violation: solution.phase_one_violation,
            },
            m: self.m,
            nominal: self.nominal.clone(),
            solution,
        })
    }
}

pub(crate) struct StageOutcome {
    pub diagnostics: StageDiagnostics,
    pub solution: QpSolution,
    m: usize,
    nominal: DVector<f64>,
}

impl StageOutcome {
    pub fn is_optimal(&self) -> bool {
        self.solution.status == Status::Optimal
    }

    pub fn input(&self) -> DVector<f64> {
        self.solution.x().rows(0, self.m).into_owned() + &self.nominal
    }

    pub fn extra(&self, index: usize) -> f64 {
        self.solution.x()[self.m + index]
    }
}
