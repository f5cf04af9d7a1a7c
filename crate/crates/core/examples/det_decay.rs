//! Decay rate of E[det(E_t)ⁿ] against its lower bound.

use riccdiff::mc::{det_decay_rate, simulate_batch, BatchOptions};
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = ModelParams::isotropic(2, 0.0, 1.0, 1.0, Kappa::One, 0.0, 0.1)?;
    let opts = BatchOptions { track_logdet: true, ..BatchOptions::default() };
    let times = [1.0, 2.0, 3.0];
    let b = simulate_batch(&p, &SymMat::identity(2), &times, 0.01, 2000, 9, opts)?;
    for (k, t) in times.iter().enumerate() {
        let ld: Vec<f64> = b.logdets.iter().map(|l| l[k]).collect();
        let d = det_decay_rate(&ld, 2, *t, &p)?;
        println!("t = {t}: rate {:.4} ± {:.4}, bound {:.4}", d.rate, d.stderr, d.bound);
    }
    Ok(())
}
