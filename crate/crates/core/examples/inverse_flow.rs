//! Inverse matrix flow and its fluctuation scaling.

use riccdiff::mc::inverse_fluctuation_curve;
use riccdiff::riccati::{inverse_trace_bound, simulate_inverse_path};
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = ModelParams::isotropic(2, 0.0, 1.0, 1.0, Kappa::One, 0.0, 0.2)?;
    let q0 = SymMat::from_diag(&[2.0, 0.5]);
    let path = simulate_inverse_path(&q0, 2.0, 0.01, &p, 4)?;
    println!("Y_2 = {:?}", path.y.last().unwrap().to_dense().as_slice());
    if let Ok(b) = inverse_trace_bound(&p, 1, &q0) {
        println!("inverse trace bound (n = 1): {b:.4}");
    }
    let fit = inverse_fluctuation_curve(&p, &q0, 1.0, 2, &[0.05, 0.1, 0.2, 0.3], 500, 5, 0.01)?;
    println!("inverse fluctuation slope {:.3}", fit.slope);
    Ok(())
}
