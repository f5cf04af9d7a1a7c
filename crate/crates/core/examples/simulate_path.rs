//! One matrix Riccati diffusion path, matrix and half-vectorised schemes.

use riccdiff::riccati::{simulate_path, simulate_path_vech};
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = ModelParams::isotropic(2, 0.0, 1.0, 1.0, Kappa::One, 0.0, 0.3)?;
    let q0 = SymMat::from_diag(&[2.0, 0.5]);
    let m = simulate_path(&q0, 5.0, 1e-3, &p, 42)?;
    let v = simulate_path_vech(&q0, 5.0, 1e-3, &p, 42)?;
    m.check()?;
    for k in (0..m.grid.len()).step_by(500) {
        let l = m.q[k].eigenvalues();
        println!("t = {:.1}  Tr = {:.4}  λ = {:.4?}  (vech Tr = {:.4})", m.grid[k], m.q[k].trace(), l, v.q[k].trace());
    }
    println!("flooring rate {:.4}%", 100.0 * m.floor_rate());
    Ok(())
}
