//! Continuous algebraic Riccati equation by Newton–Kleinman iteration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;

/// Solves `FᵀX + XF = C` through its Kronecker form.
pub fn lyapunov(f: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    if f.ncols() != n || c.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "lyapunov operands",
            expected: n,
            got: c.nrows(),
        });
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let ft = f.transpose();
    let op = eye.kronecker(&ft) + ft.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, c.as_slice());
    let sol = op
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Lyapunov operator is singular".into()))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    a.complex_eigenvalues().iter().all(|l| l.re < 0.0)
}

/// `‖AᵀP + PA − PBR⁻¹BᵀP + Q‖∞` (max absolute entry).
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<f64> {
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Validation("R must be invertible".into()))?;
    let res = a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q;
    Ok(res.amax())
}

/// Stabilizing gain by Bass's method: with `β > ‖A‖`, solve
/// `(A + βI)Z + Z(A + βI)ᵀ = 2BBᵀ` and take `K = BᵀZ⁻¹`.
fn initial_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if is_hurwitz(a) {
        return Ok(DMatrix::zeros(b.ncols(), n));
    }
    let beta = a.norm() + 1.0;
    let shifted = a + DMatrix::identity(n, n) * beta;
    // lyapunov solves FᵀX + XF = C, so pass F = (A + βI)ᵀ.
    let z = lyapunov(&shifted.transpose(), &(b * b.transpose() * 2.0))?;
    let z_inv = z
        .try_inverse()
        .ok_or_else(|| Error::Numerical("(A, B) is not controllable; no initial gain".into()))?;
    Ok(b.transpose() * z_inv)
}

/// Stabilizing solution `P` of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    let dims = [
        ("A columns", n, a.ncols()),
        ("B rows", n, b.nrows()),
        ("Q rows", n, q.nrows()),
        ("Q columns", n, q.ncols()),
        ("R rows", m, r.nrows()),
        ("R columns", m, r.ncols()),
    ];
    for (what, expected, got) in dims {
        crate::error::check_dim(what, expected, got)?;
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Validation("R must be symmetric positive definite".into()))?;

    let mut k = initial_gain(a, b)?;
    if !is_hurwitz(&(a - b * &k)) {
        return Err(Error::Numerical("initial gain is not stabilizing".into()));
    }
    let mut p = DMatrix::zeros(n, n);
    for iter in 0..MAX_ITER {
        let ak = a - b * &k;
        let next = lyapunov(&ak, &(-(q + k.transpose() * r * &k)))?;
        let change = (&next - &p).amax();
        p = next;
        k = r_chol.solve(&(b.transpose() * &p));
        if iter > 0 && change <= 1e-14 * (1.0 + p.amax()) {
            break;
        }
        if iter + 1 == MAX_ITER {
            return Err(Error::Numerical(format!(
                "CARE iteration did not converge in {MAX_ITER} steps"
            )));
        }
    }
    if !is_hurwitz(&(a - b * &k)) {
        return Err(Error::Numerical("CARE solution is not stabilizing".into()));
    }
    Ok(p)
}
