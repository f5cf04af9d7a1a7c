//! Lyapunov exponents of the stochastic exponential semigroup.

use riccdiff::matcore::log_norm;
use riccdiff::mc::{lyapunov_exponent, semigroup_samples};
use riccdiff::riccati::solve_fixed_point;
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = nalgebra::DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, 0.3, 0.2]);
    let p = ModelParams::new(a, SymMat::identity(2), SymMat::identity(2), Kappa::Zero, 0.0, 0.05)?;
    let pinf = solve_fixed_point(&p)?;
    let mu = log_norm(&(p.a() - pinf.to_dense() * p.s().to_dense()))?;
    let samples = semigroup_samples(&p, &pinf, 10.0, 0.01, 200, 5)?;
    let finals: Vec<_> = samples.into_iter().map(|s| s.e).collect();
    let st = lyapunov_exponent(&finals, 10.0, mu / 2.0)?;
    println!("μ(A − P∞S) = {mu:.4}");
    println!("exponent quantiles 5/50/95%: {:.4} {:.4} {:.4}", st.q05, st.median, st.q95);
    println!("fraction below μ/2: {:.3}", st.fraction_below);
    Ok(())
}
