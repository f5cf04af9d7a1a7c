//! Forgetting of the initial condition: W₁ distance between two starts.

use riccdiff::mc::stationarity_diagnostic;
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = ModelParams::scalar(1.0, 1.0, 1.0, Kappa::One, 0.0, 0.3)?;
    let times: Vec<f64> = (1..=8).map(f64::from).collect();
    let c = stationarity_diagnostic(&p, &SymMat::from_diag(&[0.1]), &SymMat::from_diag(&[5.0]), &times, 0.01, 2000, 3)?;
    for k in 0..c.times.len() {
        println!("t = {:.0}: W₁ = {:.4} ± {:.4}", c.times[k], c.distance[k], c.stderr[k]);
    }
    println!("fitted decay rate {:.3}", c.rate);
    Ok(())
}
