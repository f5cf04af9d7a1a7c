//! Monte Carlo trace moments against the scalar comparison bound.

use riccdiff::mc::{estimate_moment_norm, forward_sampler, Functional};
use riccdiff::riccati::trace_moment_bound;
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = ModelParams::isotropic(2, 0.0, 1.0, 1.0, Kappa::One, 0.0, 0.3)?;
    let q0 = SymMat::identity(2);
    let sampler = forward_sampler(&p, &q0, 0.01);
    for n in [1, 2, 4] {
        let est = estimate_moment_norm(&sampler, Functional::Trace, n, 2.0, 2000, 1)?;
        let bound = trace_moment_bound(&p, n as usize, 2.0, &q0)?;
        println!("n={n}: |||Tr Q_2|||ₙ = {:.4} ± {:.4}, bound {:.4}", est.value, est.stderr, bound.at_t);
    }
    Ok(())
}
