//! Primal active-set method for small dense convex QPs.
//!
//! The solver works on a rescaled copy of the problem: variables are scaled
//! by `dᵢ = 1/√Hᵢᵢ` (1 where `Hᵢᵢ = 0`), constraint rows are normalized to
//! unit length, and the whole point is divided by `σ = max(‖f̃‖∞, ‖b̃‖∞)` so
//! that step and multiplier tolerances are relative to the data. The ridge `ε_reg·I` is added in scaled coordinates, so it acts
//! as a relative perturbation on curved directions and as an absolute one on
//! flat directions.

use nalgebra::{DMatrix, DVector};

use super::phase_one::check_feasibility;
use super::problem::{kkt_residual, QpProblem, QpSolution, Status};
use crate::error::{Error, Result};

/// `ε_reg = REG_SCALE·(1 + ‖H̃‖∞)` in scaled coordinates.
pub const REG_SCALE: f64 = 1e-9;

const STEP_TOL: f64 = 1e-11;
const MULT_TOL: f64 = 1e-10;
const BLOCK_TOL: f64 = 1e-12;

/// Solve `min ½xᵀHx + fᵀx  s.t.  Ax ≤ b`.
///
/// Infeasibility is decided up front by the phase-I problem, so `Infeasible`
/// is only ever returned together with a positive violation certificate.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    problem.validate()?;
    let n = problem.num_vars();
    let m = problem.num_constraints();

    let feas = check_feasibility(&problem.ineq_matrix, &problem.ineq_rhs)?;
    if !feas.feasible {
        return Ok(QpSolution {
            status: Status::Infeasible,
            x_opt: None,
            objective: f64::INFINITY,
            active_set: Vec::new(),
            multipliers: DVector::zeros(m),
            kkt_residual: f64::INFINITY,
            max_violation: problem.max_violation(&feas.point),
            phase_one_violation: feas.min_violation,
            iterations: 0,
        });
    }

    let scaled = Scaled::new(problem);
    let start = feas.point.component_div(&scaled.d) / scaled.sigma;
    let (y, mu_scaled, working, iterations) = scaled.active_set(start)?;

    let x = y.component_mul(&scaled.d) * scaled.sigma;
    let mut multipliers = DVector::zeros(m);
    for i in 0..m {
        if scaled.row_norm[i] > 0.0 {
            multipliers[i] = mu_scaled[i] * scaled.sigma / scaled.row_norm[i];
        }
    }

    // Residual of the regularized problem in original coordinates.
    let mut regularized = problem.clone();
    for i in 0..n {
        regularized.hessian[(i, i)] += scaled.ridge / (scaled.d[i] * scaled.d[i]);
    }
    let kkt = kkt_residual(&regularized, &x, &multipliers)?;

    Ok(QpSolution {
        status: Status::Optimal,
        objective: problem.objective(&x),
        max_violation: problem.max_violation(&x),
        x_opt: Some(x),
        active_set: working,
        multipliers,
        kkt_residual: kkt,
        phase_one_violation: feas.min_violation,
        iterations,
    })
}

struct Scaled {
    d: DVector<f64>,
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    rows: DMatrix<f64>,
    rhs: DVector<f64>,
    row_norm: DVector<f64>,
    sigma: f64,
    ridge: f64,
}

impl Scaled {
    fn new(problem: &QpProblem) -> Self {
        let n = problem.num_vars();
        let m = problem.num_constraints();
        let d = DVector::from_fn(n, |i, _| {
            let h = problem.hessian[(i, i)];
            if h > 0.0 && h.is_finite() {
                1.0 / h.sqrt()
            } else {
                1.0
            }
        });

        let mut hessian = DMatrix::from_fn(n, n, |i, j| d[i] * problem.hessian[(i, j)] * d[j]);
        let inf_norm = (0..n)
            .map(|i| hessian.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let ridge = REG_SCALE * (1.0 + inf_norm);
        for i in 0..n {
            hessian[(i, i)] += ridge;
        }
        let mut linear = problem.linear_cost.component_mul(&d);

        let mut rows = DMatrix::from_fn(m, n, |i, j| problem.ineq_matrix[(i, j)] * d[j]);
        let mut rhs = problem.ineq_rhs.clone();
        let mut row_norm = DVector::zeros(m);
        for i in 0..m {
            let norm = rows.row(i).norm();
            row_norm[i] = norm;
            if norm > 0.0 {
                rows.row_mut(i).unscale_mut(norm);
                rhs[i] /= norm;
            }
        }
        let sigma = linear.amax().max(rhs.amax());
        let sigma = if sigma > 0.0 && sigma.is_finite() {
            sigma
        } else {
            1.0
        };
        linear /= sigma;
        rhs /= sigma;

        Self {
            d,
            hessian,
            linear,
            rows,
            rhs,
            row_norm,
            sigma,
            ridge,
        }
    }

    /// Returns the minimizer, per-row multipliers, final working set and
    /// iteration count.
    fn active_set(
        &self,
        mut y: DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>, Vec<usize>, usize)> {
        let n = y.len();
        let m = self.rows.nrows();
        let max_iter = 100 * (n + m);
        let mut working: Vec<usize> = Vec::new();

        for iter in 0..max_iter {
            let gradient = &self.hessian * &y + &self.linear;
            let (step, mu) = self.equality_step(&working, &gradient)?;

            if step.amax() <= STEP_TOL * (1.0 + y.amax()) {
                let tol = MULT_TOL * (1.0 + gradient.amax());
                // Most negative multiplier; lowest constraint index on ties.
                let mut drop: Option<(usize, f64)> = None;
                for (k, &value) in mu.iter().enumerate() {
                    if value < -tol {
                        let better = match drop {
                            None => true,
                            Some((pos, best)) => {
                                value < best || value == best && working[k] < working[pos]
                            }
                        };
                        if better {
                            drop = Some((k, value));
                        }
                    }
                }
                match drop {
                    None => {
                        let mut multipliers = DVector::zeros(m);
                        for (k, &row) in working.iter().enumerate() {
                            multipliers[row] = mu[k].max(0.0);
                        }
                        let mut active = working.clone();
                        active.sort_unstable();
                        return Ok((y, multipliers, active, iter + 1));
                    }
                    Some((k, _)) => {
                        working.remove(k);
                    }
                }
                continue;
            }

            // Ratio test over constraints outside the working set.
            let mut alpha = 1.0;
            let mut blocking: Option<usize> = None;
            for i in 0..m {
                if self.row_norm[i] == 0.0 || working.contains(&i) {
                    continue;
                }
                let rate = self.rows.row(i).dot(&step.transpose());
                if rate <= BLOCK_TOL * step.norm() {
                    continue;
                }
                let room = (self.rhs[i] - self.rows.row(i).dot(&y.transpose())).max(0.0);
                let ratio = room / rate;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
            y += alpha * &step;
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        Err(Error::SolverFailure {
            iterations: max_iter,
            context: "active-set QP",
        })
    }

    /// Solve the equality-constrained subproblem on the working set with a
    /// null-space method. The step lies exactly in the null space of the
    /// working rows, which keeps nearly parallel rows from producing
    /// spurious steps at a vertex.
    fn equality_step(
        &self,
        working: &[usize],
        gradient: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = gradient.len();
        let k = working.len();
        if k == 0 {
            let step = self
                .hessian
                .clone()
                .cholesky()
                .ok_or_else(|| {
                    Error::Numerical("regularized Hessian is not positive definite".into())
                })?
                .solve(&(-gradient));
            return Ok((step, DVector::zeros(0)));
        }
        // QR of [Wᵀ | I] yields a full orthonormal basis whose first k
        // columns span the working rows.
        let mut aug = DMatrix::zeros(n, k + n);
        for (r, &row) in working.iter().enumerate() {
            aug.column_mut(r).copy_from(&self.rows.row(row).transpose());
        }
        aug.view_mut((0, k), (n, n)).fill_with_identity();
        let qr = aug.qr();
        let q = qr.q();
        let r = qr.r();

        let step = if k >= n {
            DVector::zeros(n)
        } else {
            let z = q.columns(k, n - k);
            let reduced = z.transpose() * &self.hessian * z;
            let coeff = reduced
                .cholesky()
                .ok_or_else(|| Error::Numerical("reduced Hessian is not positive definite".into()))?
                .solve(&(-(z.transpose() * gradient)));
            z * coeff
        };

        // Wᵀμ = −(g + Hp)  ⇒  R₁μ = −Q₁ᵀ(g + Hp).
        let residual = -(gradient + &self.hessian * &step);
        let rhs = q.columns(0, k).transpose() * residual;
        let r1 = r.view((0, 0), (k, k)).into_owned();
        let mu = r1
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::Numerical("dependent rows in active-set working set".into()))?;
        Ok((step, mu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two_identity() -> DMatrix<f64> {
        DMatrix::identity(2, 2) * 2.0
    }

    #[test]
    fn unconstrained_minimizer() {
        let p = QpProblem::unconstrained(two_by_two_identity(), DVector::from_vec(vec![-2.0, 0.0]))
            .unwrap();
        let s = solve_qp(&p).unwrap();
        assert!(s.is_optimal());
        assert!((s.x() - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-8);
        assert!((s.objective + 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_active_bound() {
        let p = QpProblem::new(
            two_by_two_identity(),
            DVector::from_vec(vec![-2.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_vec(vec![0.5]),
        )
        .unwrap();
        let s = solve_qp(&p).unwrap();
        assert!((s.x() - DVector::from_vec(vec![0.5, 0.0])).amax() < 1e-8);
        assert_eq!(s.active_set, vec![0]);
        assert!((s.multipliers[0] - 1.0).abs() < 1e-6);
        assert!(s.kkt_residual < 1e-6);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let p = QpProblem::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![-1.0, -1.0]),
        )
        .unwrap();
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.status, Status::Infeasible);
        assert!(s.x_opt.is_none());
        assert!(s.phase_one_violation > 1e-8);
    }

    #[test]
    fn semidefinite_hessian_gets_unique_answer() {
        // min (x₂ − 3)² with x₁ unconstrained in curvature: ridge picks x₁ = 0.
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]);
        let p = QpProblem::new(
            h,
            DVector::from_vec(vec![0.0, -6.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let s = solve_qp(&p).unwrap();
        let x = s.x();
        assert!(x[0] + x[1] <= 1.0 + 1e-9);
        // Optimum pushes x₂ toward 3 so x₁ must go negative; x₂ is unique up to ridge.
        assert!((x[1] - 3.0).abs() < 1e-6, "{x}");
    }

    #[test]
    fn redundant_and_duplicated_rows() {
        let p = QpProblem::new(
            two_by_two_identity(),
            DVector::from_vec(vec![-2.0, -2.0]),
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 1.0]),
            DVector::from_vec(vec![0.5, 0.5, 1.0, 0.25]),
        )
        .unwrap();
        let s = solve_qp(&p).unwrap();
        assert!((s.x() - DVector::from_vec(vec![0.5, 0.25])).amax() < 1e-8);
    }

    #[test]
    fn equality_as_paired_inequalities() {
        let p = QpProblem::new(
            two_by_two_identity(),
            DVector::from_vec(vec![-2.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let s = solve_qp(&p).unwrap();
        assert!(s.x().amax() < 1e-8, "{}", s.x());
    }

    #[test]
    fn asymmetric_hessian_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let p = QpProblem {
            hessian: h,
            linear_cost: DVector::zeros(2),
            ineq_matrix: DMatrix::zeros(0, 2),
            ineq_rhs: DVector::zeros(0),
        };
        assert!(matches!(solve_qp(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn bad_dimensions_rejected() {
        let p = QpProblem {
            hessian: DMatrix::identity(2, 2),
            linear_cost: DVector::zeros(2),
            ineq_matrix: DMatrix::zeros(1, 3),
            ineq_rhs: DVector::zeros(1),
        };
        assert!(matches!(solve_qp(&p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn kkt_residual_examples() {
        let p = QpProblem::new(
            two_by_two_identity(),
            DVector::from_vec(vec![-2.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_vec(vec![0.5]),
        )
        .unwrap();
        let at_opt = kkt_residual(
            &p,
            &DVector::from_vec(vec![0.5, 0.0]),
            &DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        assert_eq!(at_opt, 0.0);
        let at_origin = kkt_residual(&p, &DVector::zeros(2), &DVector::zeros(1)).unwrap();
        assert_eq!(at_origin, 2.0);

        let free =
            QpProblem::unconstrained(two_by_two_identity(), DVector::from_vec(vec![-2.0, 0.0]))
                .unwrap();
        let r = kkt_residual(
            &free,
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::zeros(0),
        )
        .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn badly_scaled_problem() {
        // ACC-like magnitudes: tiny input weight, large input values.
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0 / 1650.0_f64.powi(2), 4e-3]));
        let p = QpProblem::new(
            h,
            DVector::zeros(2),
            DMatrix::from_row_slice(3, 2, &[0.0121212, -1.0, -1.0, 0.0, 1.0, 0.0]),
            DVector::from_vec(vec![-497.575, 4855.95 + 200.1, 4855.95 - 200.1]),
        )
        .unwrap();
        let s = solve_qp(&p).unwrap();
        assert!(s.is_optimal());
        assert!(s.max_violation <= 1e-8 * (1.0 + 5056.05));
        assert!(s.kkt_residual <= 1e-6);
    }
}
