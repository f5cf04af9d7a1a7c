//! Ensemble Kalman-Bucy filter against the exact Kalman-Bucy filter.

use nalgebra::{DMatrix, DVector};
use riccdiff::enkf::{kalman_bucy, run_enkf, simulate_truth_seeded, Ensemble, EnkfType, FilterModel};
use riccdiff::rng::rng_from_seed;
use riccdiff::SymMat;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = FilterModel::new(
        DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -0.5]),
        DMatrix::identity(2, 2),
        SymMat::identity(2),
        SymMat::identity(2),
    )?;
    let m0 = DVector::zeros(2);
    let p0 = SymMat::identity(2);
    let truth = simulate_truth_seeded(&model, &m0, 3.0, 0.01, 1)?;
    let kb = kalman_bucy(&model, &truth.dy, &m0, &p0, 0.01)?;
    for kind in [EnkfType::One, EnkfType::Two] {
        for n in [20, 200] {
            let mut rng = rng_from_seed(2);
            let ens = Ensemble::gaussian(n, &m0, &p0, kind, 0.0, &mut rng)?;
            let rec = run_enkf(&model, ens, &truth, 100, &mut rng)?;
            let gap = (rec.cov.last().unwrap() - kb.cov.last().unwrap()).spectral_norm();
            let mean_gap = (rec.mean.last().unwrap() - kb.mean.last().unwrap()).norm();
            println!("{kind:?} N={n}: ‖P̂ − P‖ = {gap:.4}, ‖m̂ − m‖ = {mean_gap:.4}");
        }
    }
    Ok(())
}
