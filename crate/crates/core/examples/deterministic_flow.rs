//! Deterministic Riccati flow converging to its fixed point.

use riccdiff::riccati::{integrate_det_flow, solve_fixed_point, solve_fixed_point_hamiltonian};
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = nalgebra::DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 0.0, 0.3]);
    let p = ModelParams::new(a, SymMat::identity(2), SymMat::from_diag(&[1.0, 2.0]), Kappa::One, 0.0, 0.0)?;
    let pinf = solve_fixed_point(&p)?;
    let schur = solve_fixed_point_hamiltonian(&p)?;
    println!("P∞ = {:?}", pinf.to_dense().as_slice());
    println!("solver gap = {:.2e}", pinf.max_abs_diff(&schur));

    let flow = integrate_det_flow(&SymMat::zeros(2), 8.0, 1e-3, &p)?;
    for (t, q) in flow.times.iter().zip(&flow.phi).step_by(1000) {
        println!("t = {t:4.1}  ‖φ_t − P∞‖_F = {:.3e}", (q - &pinf).frob_norm());
    }
    Ok(())
}
