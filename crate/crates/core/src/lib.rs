pub mod error;
pub mod frameworks;
pub mod plants;
pub mod qp;
pub mod sim;
pub mod system;

pub use error::{Error, Result};
pub use frameworks::{ControlResult, FrameworkConfig, Method, SlackDomain};
pub use qp::{solve_qp, QpProblem, QpSolution, Status};
pub use system::{
    Certificate, CertificateKind, ConstraintRow, ControlAffineSystem, InputPolytope, Sense,
};
