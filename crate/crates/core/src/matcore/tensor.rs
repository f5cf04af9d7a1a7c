use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{half_dim, sym_eigen, tol_psd, vech, SymMat};

fn basis(r: usize, i: usize, j: usize) -> SymMat {
    let mut e = SymMat::zeros(r);
    e.set(i, j, if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 });
    e
}

fn check_psd(name: &str, q: &SymMat) -> Result<()> {
    let lmin = q.lambda_min();
    if lmin < -tol_psd(q) {
        return Err(Error::InvalidArgument(format!("{name} is not PSD (λ_min = {lmin:e})")));
    }
    Ok(())
}

/// Matrix of `H ↦ (Q1 H Q2 + Q2 H Q1)/2` in half-vectorized coordinates.
pub fn sym_tensor_embed(q1: &SymMat, q2: &SymMat) -> Result<DMatrix<f64>> {
    crate::error::check_dim(q1.dim(), q2.dim())?;
    check_psd("Q1", q1)?;
    check_psd("Q2", q2)?;
    Ok(embed_unchecked(q1, q2))
}

pub(crate) fn embed_unchecked(q1: &SymMat, q2: &SymMat) -> DMatrix<f64> {
    let r = q1.dim();
    let rb = half_dim(r);
    let a = q1.to_dense();
    let b = q2.to_dense();
    let mut out = DMatrix::zeros(rb, rb);
    let mut col = 0;
    for i in 0..r {
        for j in i..r {
            let e = basis(r, i, j).to_dense();
            let img = (&a * &e * &b + &b * &e * &a) * 0.5;
            let v = vech(&SymMat::sym_part(&img)).coords();
            for (row, x) in v.into_iter().enumerate() {
                out[(row, col)] = x;
            }
            col += 1;
        }
    }
    // Exact symmetry of the operator; removes rounding asymmetry.
    let t = out.transpose();
    (out + t) * 0.5
}

/// PSD square root of [`sym_tensor_embed`].
pub fn sym_tensor_embed_sqrt(q1: &SymMat, q2: &SymMat) -> Result<DMatrix<f64>> {
    let t = sym_tensor_embed(q1, q2)?;
    Ok(psd_sqrt_dense(&t))
}

pub(crate) fn psd_sqrt_dense(t: &DMatrix<f64>) -> DMatrix<f64> {
    let d = sym_eigen(t);
    let n = t.nrows();
    let v = &d.eigenvectors;
    let s: Vec<f64> = d.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * s[k] * v[(j, k)]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::testutil::{random_spd, random_sym};
    use crate::matcore::unvech;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn identity_pair_gives_identity() {
        for r in 1..5 {
            let t = sym_tensor_embed(&SymMat::identity(r), &SymMat::identity(r)).unwrap();
            let rb = half_dim(r);
            assert!((t - DMatrix::identity(rb, rb)).norm() < 1e-15);
        }
    }

    #[test]
    fn scalar_case() {
        let t = sym_tensor_embed(&SymMat::from_diag(&[3.0]), &SymMat::from_diag(&[0.5])).unwrap();
        assert_eq!(t[(0, 0)], 1.5);
    }

    #[test]
    fn rejects_indefinite_input() {
        let q = SymMat::from_diag(&[1.0, -0.5]);
        assert!(matches!(sym_tensor_embed(&q, &SymMat::identity(2)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn square_root_squares_back() {
        let mut rng = rng_from_seed(9);
        let a = random_spd(&mut rng, 3, 0.1);
        let b = random_spd(&mut rng, 3, 0.1);
        let t = sym_tensor_embed(&a, &b).unwrap();
        let s = sym_tensor_embed_sqrt(&a, &b).unwrap();
        assert!((&s * &s - &t).norm() < 1e-10 * (1.0 + t.norm()));
    }

    proptest! {
        #[test]
        fn action_matches_definition(seed in any::<u64>(), r in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let a = random_spd(&mut rng, r, 0.0);
            let b = random_spd(&mut rng, r, 0.0);
            let h = random_sym(&mut rng, r);
            let t = sym_tensor_embed(&a, &b).unwrap();
            let v = nalgebra::DVector::from_vec(vech(&h).coords());
            let lhs = unvech(&crate::matcore::VecHalf::from_coords(r, (t * v).iter().copied().collect()).unwrap());
            let (ad, bd, hd) = (a.to_dense(), b.to_dense(), h.to_dense());
            let rhs = SymMat::sym_part(&((&ad * &hd * &bd + &bd * &hd * &ad) * 0.5));
            prop_assert!((lhs - rhs).frob_norm() <= 1e-12 * (1.0 + a.frob_norm() * b.frob_norm() * h.frob_norm()));
        }

        #[test]
        fn eigenvalue_bracket(seed in any::<u64>(), r in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let a = random_spd(&mut rng, r, 0.05);
            let b = random_spd(&mut rng, r, 0.05);
            let ev = sym_eigen(&sym_tensor_embed(&a, &b).unwrap()).eigenvalues;
            let lo = a.lambda_min() * b.lambda_min();
            let hi = a.lambda_max() * b.lambda_max();
            let slack = 1e-10 * (1.0 + hi);
            prop_assert!(ev.iter().all(|&l| l >= lo - slack && l <= hi + slack));
        }
    }
}
