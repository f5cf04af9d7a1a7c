//! Noise thresholds for a few model configurations.

use riccdiff::riccati::thresholds;
use riccdiff::{Kappa, ModelParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (r, kappa, varpi) in [(1, Kappa::One, 0.0), (3, Kappa::One, 0.0), (2, Kappa::One, 0.5), (2, Kappa::Zero, 0.5)] {
        let p = ModelParams::isotropic(r, 0.0, 1.0, 1.0, kappa, varpi, 0.0)?;
        for n in [1, 2, 4] {
            let t = thresholds(&p, n)?;
            println!(
                "r={r} κ={} ϖ={varpi} n={n}: ε₀={} εₙ(V)={} εₙ(U,V)={}",
                kappa.as_f64(),
                t.eps0,
                t.eps_n_v,
                t.eps_n_uv
            );
        }
    }
    Ok(())
}
