//! The unified problem rewritten in `v = S(u − k)`, `ε = S_Δ Δ` so that the
//! cost becomes `½(vᵀv + εᵀε)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qp::QpProblem;
use crate::system::{lie_derivatives, Certificate, ControlAffineSystem};

use super::{FrameworkConfig, SlackDomain};

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedProblem {
    /// QP over `(v, ε₁, ε₂)`.
    pub problem: QpProblem,
    /// Symmetric square root of `H`.
    pub s: DMatrix<f64>,
    pub s_inv: DMatrix<f64>,
    /// Diagonal of `S_Δ = √H_Δ`.
    pub s_delta: [f64; 2],
    /// `k(x)`.
    pub nominal: DVector<f64>,
}

impl StandardizedProblem {
    /// `(u, Δ) ↦ (v, ε)`.
    pub fn forward(&self, u: &DVector<f64>, delta: [f64; 2]) -> DVector<f64> {
        let m = self.nominal.len();
        let mut z = DVector::zeros(m + 2);
        z.rows_mut(0, m).copy_from(&(&self.s * (u - &self.nominal)));
        z[m] = self.s_delta[0] * delta[0];
        z[m + 1] = self.s_delta[1] * delta[1];
        z
    }

    /// `(v, ε) ↦ (u, Δ)`.
    pub fn recover(&self, z: &DVector<f64>) -> Result<(DVector<f64>, [f64; 2])> {
        let m = self.nominal.len();
        if z.len() != m + 2 {
            return Err(Error::DimensionMismatch {
                what: "standardized point",
                expected: m + 2,
                got: z.len(),
            });
        }
        let u = &self.s_inv * z.rows(0, m) + &self.nominal;
        Ok((u, [z[m] / self.s_delta[0], z[m + 1] / self.s_delta[1]]))
    }
}

/// Symmetric positive definite square root.
pub(crate) fn spd_sqrt(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = h.clone().symmetric_eigen();
    let floor = 1e-14 * (1.0 + h.amax());
    if eig.eigenvalues.iter().any(|&l| !(l > floor)) {
        return Err(Error::Validation(
            "input weight H must be positive definite".into(),
        ));
    }
    let q = &eig.eigenvectors;
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let inv_root = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let s = q * root * q.transpose();
    let s_inv = q * inv_root * q.transpose();
    Ok((
        (&s + s.transpose()) * 0.5,
        (&s_inv + s_inv.transpose()) * 0.5,
    ))
}

/// Standardized form of the unified problem configured by `cfg`
/// (`slack_domain`, `slack_weights` as `H_Δ`). Pinned slacks become paired
/// inequalities `ε = 0`.
pub fn standardize(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbf: &Certificate,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<StandardizedProblem> {
    let m = sys.input_dim();
    if cfg.input_weight.nrows() != m || cfg.input_weight.ncols() != m {
        return Err(Error::DimensionMismatch {
            what: "input weight",
            expected: m,
            got: cfg.input_weight.nrows(),
        });
    }
    let (s, s_inv) = spd_sqrt(&cfg.input_weight)?;
    if cfg
        .slack_weights
        .iter()
        .any(|&w| !(w > 0.0 && w.is_finite()))
    {
        return Err(Error::Validation("slack weights must be positive".into()));
    }
    let s_delta = [cfg.slack_weights[0].sqrt(), cfg.slack_weights[1].sqrt()];
    let k = sys.nominal(x)?;
    let n = m + 2;

    let poly = sys.input_polytope();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let poly_v = &poly.a * &s_inv;
    let poly_rhs = &poly.b - &poly.a * &k;
    for i in 0..poly.a.nrows() {
        let mut a = DVector::zeros(n);
        a.rows_mut(0, m).copy_from(&poly_v.row(i).transpose());
        rows.push((a, poly_rhs[i]));
    }

    // L_f* c = L_f c + L_g c·k,  L_g* c = L_g c S⁻¹.
    let star = |cert: &Certificate| -> Result<(f64, DVector<f64>)> {
        let (lf, lg) = lie_derivatives(cert, sys, x)?;
        Ok((lf + lg.dot(&k), s_inv.tr_mul(&lg)))
    };
    let (lf_v, lg_v) = star(clf)?;
    let mut a = DVector::zeros(n);
    a.rows_mut(0, m).copy_from(&lg_v);
    a[m] = -1.0 / s_delta[0];
    rows.push((a, -(lf_v + clf.decay_rate() * clf.value(x))));

    let (lf_h, lg_h) = star(cbf)?;
    let mut a = DVector::zeros(n);
    a.rows_mut(0, m).copy_from(&(-lg_h));
    a[m + 1] = 1.0 / s_delta[1];
    rows.push((a, lf_h + cbf.decay_rate() * cbf.value(x)));

    for (i, domain) in cfg.slack_domain.iter().enumerate() {
        if *domain == SlackDomain::Zero {
            for sign in [1.0, -1.0] {
                let mut a = DVector::zeros(n);
                a[m + i] = sign;
                rows.push((a, 0.0));
            }
        }
    }

    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let problem = QpProblem::new(DMatrix::identity(n, n), DVector::zeros(n), a, b)?;
    Ok(StandardizedProblem {
        problem,
        s,
        s_inv,
        s_delta,
        nominal: k,
    })
}
