//! Phase-I feasibility: minimize the total hinge violation `Σ max(0, aᵢᵀx − bᵢ)`.
//!
//! Written as the LP
//!
//! ```text
//! min Σ tᵢ   s.t.  A(x⁺ − x⁻) − t + s = b,   x⁺, x⁻, t, s ≥ 0
//! ```
//!
//! and solved with a dense tableau simplex using Bland's rule. The starting
//! basis is always feasible: row `i` starts on `sᵢ` when `bᵢ ≥ 0` and on `tᵢ`
//! otherwise.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Feasible iff the minimal total violation is at most `FEAS_TOL·(1 + ‖b‖∞)`.
pub const FEAS_TOL: f64 = 1e-8;

const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Witness when feasible, otherwise a point of minimal total violation.
    pub point: DVector<f64>,
    /// Minimal total hinge violation (the infeasibility certificate).
    pub min_violation: f64,
    pub tolerance: f64,
}

pub fn feasibility_tolerance(b: &DVector<f64>) -> f64 {
    FEAS_TOL * (1.0 + b.amax())
}

/// Decide whether `{x : Ax ≤ b}` is nonempty.
pub fn check_feasibility(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Feasibility> {
    check_dim("ineq_rhs", a.nrows(), b.len())?;
    let n = a.ncols();
    let m = a.nrows();
    let tolerance = feasibility_tolerance(b);
    if m == 0 {
        return Ok(Feasibility {
            feasible: true,
            point: DVector::zeros(n),
            min_violation: 0.0,
            tolerance,
        });
    }

    let point = minimize_violation(a, b)?;
    let min_violation = (a * &point - b).iter().map(|r| r.max(0.0)).sum::<f64>();
    Ok(Feasibility {
        feasible: min_violation <= tolerance,
        point,
        min_violation,
        tolerance,
    })
}

/// Vertex of the phase-I LP.
fn minimize_violation(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let m = a.nrows();
    let cols = 2 * n + 2 * m;
    let rhs = cols;
    let t_col = |i: usize| 2 * n + i;
    let s_col = |i: usize| 2 * n + m + i;

    let mut tab = DMatrix::<f64>::zeros(m, cols + 1);
    let mut basis = vec![0usize; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[(i, j)] = sign * a[(i, j)];
            tab[(i, n + j)] = -sign * a[(i, j)];
        }
        tab[(i, t_col(i))] = -sign;
        tab[(i, s_col(i))] = sign;
        tab[(i, rhs)] = sign * b[i];
        basis[i] = if b[i] < 0.0 { t_col(i) } else { s_col(i) };
    }

    let cost = |j: usize| {
        if (2 * n..2 * n + m).contains(&j) {
            1.0
        } else {
            0.0
        }
    };

    let max_iter = 50 * (cols + m) + 100;
    for _ in 0..max_iter {
        // Reduced costs from scratch: cheap at these sizes and avoids drift.
        let entering = (0..cols).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let col_scale = (0..m).fold(1.0_f64, |acc, i| acc.max(tab[(i, j)].abs()));
            let reduced = cost(j) - (0..m).map(|i| cost(basis[i]) * tab[(i, j)]).sum::<f64>();
            reduced < -PIVOT_TOL * col_scale
        });
        let Some(enter) = entering else {
            let mut x = DVector::zeros(n);
            for (i, &var) in basis.iter().enumerate() {
                if var < n {
                    x[var] += tab[(i, rhs)];
                } else if var < 2 * n {
                    x[var - n] -= tab[(i, rhs)];
                }
            }
            return Ok(x);
        };

        let col_scale = (0..m).fold(0.0_f64, |acc, i| acc.max(tab[(i, enter)].abs()));
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = tab[(i, enter)];
            if coef <= PIVOT_TOL * col_scale {
                continue;
            }
            let ratio = tab[(i, rhs)].max(0.0) / coef;
            leave = match leave {
                None => Some((i, ratio)),
                Some((r, best)) => {
                    let tie = (ratio - best).abs() <= 1e-14 * (1.0 + best.abs());
                    if ratio < best && !tie || tie && basis[i] < basis[r] {
                        Some((i, ratio))
                    } else {
                        Some((r, best))
                    }
                }
            };
        }
        // The objective is bounded below by zero, so a ratio row always exists.
        let (row, _) = leave.ok_or_else(|| {
            Error::Numerical("phase-I LP reported unbounded; data is ill-conditioned".into())
        })?;
        pivot(&mut tab, row, enter);
        basis[row] = enter;
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        context: "phase-I simplex",
    })
}

fn pivot(tab: &mut DMatrix<f64>, row: usize, col: usize) {
    let p = tab[(row, col)];
    let width = tab.ncols();
    for j in 0..width {
        tab[(row, j)] /= p;
    }
    tab[(row, col)] = 1.0;
    for i in 0..tab.nrows() {
        if i == row {
            continue;
        }
        let factor = tab[(i, col)];
        if factor == 0.0 {
            continue;
        }
        for j in 0..width {
            tab[(i, j)] -= factor * tab[(row, j)];
        }
        tab[(i, col)] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::problem::max_violation;

    fn rows(data: &[&[f64]]) -> DMatrix<f64> {
        let n = data.first().map_or(0, |r| r.len());
        DMatrix::from_fn(data.len(), n, |i, j| data[i][j])
    }

    #[test]
    fn unit_interval_is_feasible() {
        let a = rows(&[&[1.0], &[-1.0]]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let f = check_feasibility(&a, &b).unwrap();
        assert!(f.feasible);
        assert!(f.point[0] >= -1e-12 && f.point[0] <= 1.0 + 1e-12);
        assert_eq!(f.min_violation, 0.0);
    }

    #[test]
    fn contradictory_bounds_violate_by_two() {
        let a = rows(&[&[1.0], &[-1.0]]);
        let b = DVector::from_vec(vec![-1.0, -1.0]);
        let f = check_feasibility(&a, &b).unwrap();
        assert!(!f.feasible);
        assert!((f.min_violation - 2.0).abs() < 1e-12, "{}", f.min_violation);
        assert!(f.point[0] >= -1.0 - 1e-12 && f.point[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn empty_set_of_constraints() {
        let a = DMatrix::<f64>::zeros(0, 3);
        let b = DVector::<f64>::zeros(0);
        let f = check_feasibility(&a, &b).unwrap();
        assert!(f.feasible);
        assert_eq!(f.point, DVector::zeros(3));
    }

    #[test]
    fn witness_satisfies_badly_scaled_rows() {
        // CLF-like and input rows with very different magnitudes.
        let a = rows(&[&[0.0121212, -1.0], &[-1.0, 0.0], &[1.0, 0.0]]);
        let b = DVector::from_vec(vec![-497.575, 4855.95, 4855.95]);
        let f = check_feasibility(&a, &b).unwrap();
        assert!(f.feasible);
        assert!(max_violation(&a, &b, &f.point) <= 1e-8);
    }

    #[test]
    fn rejects_mismatched_rhs() {
        let a = rows(&[&[1.0]]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            check_feasibility(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
