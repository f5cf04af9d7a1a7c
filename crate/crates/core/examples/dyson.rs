//! Ordered eigenvalues: matrix diffusion against the eigenvalue SDE.

use riccdiff::dyson::{simulate_eigenvalues_from, IsotropicCoefficients};
use riccdiff::mc::{ks_distance, par_map, simulate_batch, BatchOptions};
use riccdiff::rng::{path_rng, Purpose};
use riccdiff::{Kappa, ModelParams, SymMat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (eps, t, dt, n) = (0.5, 1.0, 0.005, 2000);
    let p = ModelParams::isotropic(2, 1.0, 1.0, 1.0, Kappa::One, 0.0, eps)?;
    let b = simulate_batch(&p, &SymMat::from_diag(&[3.0, 2.0]), &[t], dt, n, 1, BatchOptions::default())?;
    let c = IsotropicCoefficients { a: 1.0, rr: 1.0, ss: 1.0, uu: 1.0, vv: 1.0 };
    let eig = par_map(n, |i| {
        let mut rng = path_rng(1, i as u64, Purpose::EigenPath);
        simulate_eigenvalues_from(&c, &[3.0, 2.0], eps, t, dt, &mut rng).map(|e| e.final_lambdas().to_vec())
    });
    let eig: Vec<Vec<f64>> = eig.into_iter().collect::<Result<_, _>>()?;
    for i in 0..2 {
        let m: Vec<f64> = b
            .states
            .iter()
            .map(|s| {
                let mut l = s[0].eigenvalues();
                l.sort_by(|x, y| y.total_cmp(x));
                l[i]
            })
            .collect();
        let e: Vec<f64> = eig.iter().map(|l| l[i]).collect();
        println!("λ{}: KS distance {:.4}", i + 1, ks_distance(&m, &e)?);
    }
    Ok(())
}
