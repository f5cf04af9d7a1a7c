//! Fluctuation around the deterministic flow: scaling in ε and in time.

use riccdiff::mc::{fluctuation_curve, fluctuation_profile, uniformity_ratio};
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q0 = SymMat::from_diag(&[2.0, 0.5]);
    for kappa in [Kappa::Zero, Kappa::One] {
        let p = ModelParams::isotropic(2, 0.0, 1.0, 1.0, kappa, 0.0, 0.1)?;
        let (fit, _) = fluctuation_curve(&p, &q0, 1.0, 2, &[0.05, 0.1, 0.2, 0.4], 2000, 3, 0.01)?;
        let prof = fluctuation_profile(&p, &q0, &[1.0, 2.0, 5.0], 2, 1000, 4, 0.01)?;
        println!("κ={}: slope {:.3}, max/min over time {:.3}", kappa.as_f64(), fit.slope, uniformity_ratio(&prof));
    }
    Ok(())
}
