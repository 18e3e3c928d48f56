//! Control-affine systems `ẋ = f(x) + g(x)u`, certificates (CLFs and CBFs)
//! and the linear constraint rows they induce on `u`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::qp::check_feasibility;

pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Input set `{u : A u ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPolytope {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl InputPolytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dim("input polytope rhs", a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    /// Axis-aligned box `lower ≤ u ≤ upper`.
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        let m = lower.len();
        let mut a = DMatrix::zeros(2 * m, m);
        let mut b = DVector::zeros(2 * m);
        for i in 0..m {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = upper[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lower[i];
        }
        Ok(Self { a, b })
    }

    /// Unconstrained input of dimension `m`.
    pub fn unbounded(m: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, m),
            b: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn contains(&self, u: &DVector<f64>, tol: f64) -> bool {
        self.a.nrows() == 0 || (&self.a * u - &self.b).iter().all(|&r| r <= tol)
    }
}

/// `ẋ = f(x) + g(x)u`, `u ∈ 𝒰`, with a nominal feedback `k(x)`.
#[derive(Clone)]
pub struct ControlAffineSystem {
    state_dim: usize,
    input_dim: usize,
    drift: VectorField,
    input_map: MatrixField,
    input_polytope: InputPolytope,
    nominal: VectorField,
}

impl fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .field("input_polytope", &self.input_polytope)
            .finish_non_exhaustive()
    }
}

impl ControlAffineSystem {
    /// Fails if the input polytope has the wrong width or is empty.
    pub fn new(
        state_dim: usize,
        input_dim: usize,
        drift: VectorField,
        input_map: MatrixField,
        input_polytope: InputPolytope,
        nominal: VectorField,
    ) -> Result<Self> {
        if state_dim == 0 || input_dim == 0 {
            return Err(Error::Validation(
                "state and input dimensions must be positive".into(),
            ));
        }
        check_dim("input polytope width", input_dim, input_polytope.dim())?;
        let feas = check_feasibility(&input_polytope.a, &input_polytope.b)?;
        if !feas.feasible {
            return Err(Error::Validation(format!(
                "input polytope is empty (minimal violation {:e})",
                feas.min_violation
            )));
        }
        Ok(Self {
            state_dim,
            input_dim,
            drift,
            input_map,
            input_polytope,
            nominal,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn input_polytope(&self) -> &InputPolytope {
        &self.input_polytope
    }

    pub fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.state_dim, x.len())?;
        let f = (self.drift)(x);
        check_dim("drift output", self.state_dim, f.len())?;
        Ok(f)
    }

    pub fn input_map(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim("state", self.state_dim, x.len())?;
        let g = (self.input_map)(x);
        check_dim("input map rows", self.state_dim, g.nrows())?;
        check_dim("input map cols", self.input_dim, g.ncols())?;
        Ok(g)
    }

    pub fn nominal(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.state_dim, x.len())?;
        let k = (self.nominal)(x);
        check_dim("nominal control", self.input_dim, k.len())?;
        Ok(k)
    }

    /// `f(x) + g(x)u`.
    pub fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("input", self.input_dim, u.len())?;
        Ok(self.drift(x)? + self.input_map(x)? * u)
    }

    /// Same plant with a different nominal controller.
    pub fn with_nominal(&self, nominal: VectorField) -> Self {
        Self {
            nominal,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CertificateKind {
    /// CLF: row `L_fV + L_gV·u + λV ≤ δ`.
    Lyapunov,
    /// CBF: row `L_fh + L_gh·u + γh ≥ δ`.
    Barrier,
}

/// A CLF or (zeroing) CBF with its analytic gradient and linear decay rate.
#[derive(Clone)]
pub struct Certificate {
    kind: CertificateKind,
    label: String,
    decay_rate: f64,
    value: ScalarField,
    gradient: VectorField,
}

impl fmt::Debug for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Certificate")
            .field("kind", &self.kind)
            .field("label", &self.label)
            .field("decay_rate", &self.decay_rate)
            .finish_non_exhaustive()
    }
}

impl Certificate {
    pub fn new(
        kind: CertificateKind,
        label: impl Into<String>,
        decay_rate: f64,
        value: ScalarField,
        gradient: VectorField,
    ) -> Result<Self> {
        if !(decay_rate > 0.0 && decay_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "decay rate must be positive and finite, got {decay_rate}"
            )));
        }
        Ok(Self {
            kind,
            label: label.into(),
            decay_rate,
            value,
            gradient,
        })
    }

    pub fn lyapunov(
        label: impl Into<String>,
        rate: f64,
        value: ScalarField,
        gradient: VectorField,
    ) -> Result<Self> {
        Self::new(CertificateKind::Lyapunov, label, rate, value, gradient)
    }

    pub fn barrier(
        label: impl Into<String>,
        rate: f64,
        value: ScalarField,
        gradient: VectorField,
    ) -> Result<Self> {
        Self::new(CertificateKind::Barrier, label, rate, value, gradient)
    }

    pub fn kind(&self) -> CertificateKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let grad = (self.gradient)(x);
        check_dim("certificate gradient", x.len(), grad.len())?;
        Ok(grad)
    }

    /// Same function with another decay rate.
    pub fn with_decay_rate(&self, rate: f64) -> Result<Self> {
        Self::new(
            self.kind,
            self.label.clone(),
            rate,
            self.value.clone(),
            self.gradient.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Leq,
    Geq,
}

/// `coeff_u·u + constant {≤, ≥} δ`, where `δ` is the slack variable at
/// `slack_index` (or zero when there is none).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub coeff_u: DVector<f64>,
    pub constant: f64,
    pub sense: Sense,
    pub slack_index: Option<usize>,
}

impl ConstraintRow {
    /// Left-hand side `coeff_u·u + constant`.
    pub fn lhs(&self, u: &DVector<f64>) -> f64 {
        self.coeff_u.dot(u) + self.constant
    }

    /// Whether `(u, δ)` satisfies the row up to `tol`.
    pub fn holds(&self, u: &DVector<f64>, slack: f64, tol: f64) -> bool {
        let lhs = self.lhs(u);
        match self.sense {
            Sense::Leq => lhs <= slack + tol,
            Sense::Geq => lhs >= slack - tol,
        }
    }

    /// The row as `a·u − s·δ ≤ rhs` with `s = ±1`: returns `(a, s, rhs)`.
    pub fn as_leq(&self) -> (DVector<f64>, f64, f64) {
        match self.sense {
            Sense::Leq => (self.coeff_u.clone(), 1.0, -self.constant),
            Sense::Geq => (-&self.coeff_u, -1.0, self.constant),
        }
    }
}

/// `(L_f c(x), L_g c(x))`.
pub fn lie_derivatives(
    cert: &Certificate,
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    check_dim("state", sys.state_dim(), x.len())?;
    let grad = cert.gradient(x)?;
    let lf = grad.dot(&sys.drift(x)?);
    let lg = sys.input_map(x)?.tr_mul(&grad);
    Ok((lf, lg))
}

/// Row for `cert` at `x` using the certificate's own decay rate.
pub fn build_constraint_row(
    cert: &Certificate,
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
    slack_index: Option<usize>,
) -> Result<ConstraintRow> {
    build_constraint_row_with_rate(cert, cert.decay_rate(), sys, x, slack_index)
}

pub fn build_constraint_row_with_rate(
    cert: &Certificate,
    rate: f64,
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
    slack_index: Option<usize>,
) -> Result<ConstraintRow> {
    let (lf, lg) = lie_derivatives(cert, sys, x)?;
    Ok(ConstraintRow {
        coeff_u: lg,
        constant: lf + rate * cert.value(x),
        sense: match cert.kind() {
            CertificateKind::Lyapunov => Sense::Leq,
            CertificateKind::Barrier => Sense::Geq,
        },
        slack_index,
    })
}

/// Default central-difference step for coordinate `xᵢ`.
pub fn default_fd_step(xi: f64) -> f64 {
    1e-5 * (1.0 + xi.abs())
}

/// Max over coordinates of `|analytic − central difference| / (1 + |analytic|)`.
///
/// `step` is scaled per coordinate as `step·(1 + |xᵢ|)`.
pub fn verify_gradient(cert: &Certificate, x: &DVector<f64>, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::Validation(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let analytic = cert.gradient(x)?;
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let h = step * (1.0 + x[i].abs());
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (cert.value(&plus) - cert.value(&minus)) / (2.0 * h);
        worst = worst.max((analytic[i] - fd).abs() / (1.0 + analytic[i].abs()));
    }
    Ok(worst)
}
