use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matcore::{spectral_abscissa, spectral_norm, SymMat};

use super::params::theta_dense;
use super::ModelParams;

const NK_MAX_ITER: usize = 100;
const SIGN_MAX_ITER: usize = 200;

/// Solves `M X + X Mᵀ + C = 0` through the Kronecker system
/// `(I ⊗ M + M ⊗ I) vec X = −vec C`.
pub fn lyapunov_solve(m: &DMatrix<f64>, c: &SymMat) -> Result<SymMat> {
    let n = m.nrows();
    crate::error::check_dim(n, c.dim())?;
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(m) + m.kronecker(&id);
    let rhs = -nalgebra::DVector::from_iterator(n * n, c.to_dense().iter().copied());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolverFailure("singular Lyapunov operator".into()))?;
    let xm = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok(SymMat::sym_part(&xm))
}

fn residual_ok(p: &SymMat, params: &ModelParams, tol: f64) -> (bool, f64) {
    let res = theta_dense(params.a(), params.r(), params.s(), p).frob_norm();
    let pn = p.frob_norm();
    (res <= tol * (1.0 + pn * pn), res)
}

fn closed_loop(params: &ModelParams, p: &SymMat) -> DMatrix<f64> {
    params.a() - p.to_dense() * params.s().to_dense()
}

/// A `P` with `A − PS` Hurwitz, found by integrating the Riccati ODE from
/// `P = 0` until the closed loop is stable.
fn stabilizing_start(params: &ModelParams) -> Result<SymMat> {
    let mut p = SymMat::zeros(params.dim());
    if spectral_abscissa(&closed_loop(params, &p))? < 0.0 {
        return Ok(p);
    }
    let scale = spectral_norm(params.a()) + params.r().spectral_norm().sqrt() * params.s().spectral_norm().sqrt() + 1.0;
    let dt = 0.05 / scale;
    let mut t = 0.0;
    let t_max = 2000.0 / scale;
    while t < t_max {
        for _ in 0..20 {
            p = super::flow::rk4_p_step(params, &p, dt);
            t += dt;
        }
        if !p.is_finite() {
            break;
        }
        if spectral_abscissa(&closed_loop(params, &p))? < 0.0 {
            return Ok(p);
        }
    }
    Err(Error::SolverFailure("no stabilizing initial gain found".into()))
}

/// Newton–Kleinman iteration for `Θ(P∞) = 0` with `A − P∞S` stable.
pub fn solve_fixed_point_newton(params: &ModelParams) -> Result<SymMat> {
    check_preconditions(params)?;
    let mut p = stabilizing_start(params)?;
    let s = params.s().to_dense();
    for _ in 0..NK_MAX_ITER {
        let m = params.a() - p.to_dense() * &s;
        let c = params.r() + &p.sandwich(params.s());
        let next = lyapunov_solve(&m, &c)?;
        let step = (&next - &p).frob_norm();
        p = next;
        if step <= 1e-14 * (1.0 + p.frob_norm()) {
            break;
        }
    }
    finish(params, p)
}

/// Stable invariant subspace of the Hamiltonian `[[Aᵀ, −S], [−R, −A]]` via
/// the matrix sign function with determinant scaling.
pub fn solve_fixed_point_hamiltonian(params: &ModelParams) -> Result<SymMat> {
    check_preconditions(params)?;
    let n = params.dim();
    let a = params.a();
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a.transpose());
    h.view_mut((0, n), (n, n)).copy_from(&(-params.s().to_dense()));
    h.view_mut((n, 0), (n, n)).copy_from(&(-params.r().to_dense()));
    h.view_mut((n, n), (n, n)).copy_from(&(-a));
    let m = 2 * n;
    let mut z = h;
    let mut converged = false;
    for _ in 0..SIGN_MAX_ITER {
        let zinv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SolverFailure("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        let det = z.determinant().abs();
        let c = if det.is_finite() && det > 0.0 { det.powf(-1.0 / m as f64) } else { 1.0 };
        let next = (&z * c + zinv / c) * 0.5;
        let diff = (&next - &z).abs().row_sum().max();
        let size = next.abs().row_sum().max();
        z = next;
        if diff <= 1e-13 * size {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SolverFailure("sign iteration did not converge".into()));
    }
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let id = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(&w22 + &id));
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(&w11 + &id)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let x = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::SolverFailure(format!("least squares failed: {e}")))?;
    finish(params, SymMat::sym_part(&x))
}

fn check_preconditions(params: &ModelParams) -> Result<()> {
    if !params.is_detectable() {
        return Err(Error::PreconditionViolated("(A, S^{1/2}) is not detectable".into()));
    }
    if !params.is_stabilizable() {
        return Err(Error::PreconditionViolated("(A, R^{1/2}) is not stabilizable".into()));
    }
    Ok(())
}

fn finish(params: &ModelParams, p: SymMat) -> Result<SymMat> {
    let (ok, res) = residual_ok(&p, params, 1e-10);
    if !ok || !p.is_finite() {
        return Err(Error::SolverFailure(format!("residual ‖Θ(P)‖ = {res:e} too large")));
    }
    if spectral_abscissa(&closed_loop(params, &p))? >= 0.0 {
        return Err(Error::SolverFailure("A − PS is not stable".into()));
    }
    Ok(p)
}

/// Stabilizing fixed point `P∞`: Newton–Kleinman, with the Hamiltonian
/// sign-function solver as fallback.
pub fn solve_fixed_point(params: &ModelParams) -> Result<SymMat> {
    match solve_fixed_point_newton(params) {
        Ok(p) => Ok(p),
        Err(Error::PreconditionViolated(m)) => Err(Error::PreconditionViolated(m)),
        Err(first) => {
            log::warn!("Newton–Kleinman failed ({first}); trying the Hamiltonian solver");
            solve_fixed_point_hamiltonian(params)
        }
    }
}
