//! Dense convex QP solver with phase-I infeasibility detection.

mod active_set;
mod phase_one;
mod problem;

pub use active_set::{solve_qp, REG_SCALE};
pub use phase_one::{check_feasibility, feasibility_tolerance, Feasibility, FEAS_TOL};
pub use problem::{kkt_residual, QpProblem, QpSolution, Status, SYMMETRY_TOL};
