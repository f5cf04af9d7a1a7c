use std::f64::consts::SQRT_2;

use crate::error::{check_dim, Error, Result};

use super::SymMat;

/// `r(r+1)/2`.
pub fn half_dim(r: usize) -> usize {
    r * (r + 1) / 2
}

/// Coordinates of a symmetric matrix in the orthonormal basis
/// `{E_ii} ∪ {(e_i e_jᵀ + e_j e_iᵀ)/√2 : i < j}`, ordered `(i, j)` with
/// `i ≤ j` row by row.
///
/// The unscaled upper triangle is kept internally so that
/// `unvech(vech(H)) == H` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct VecHalf {
    r: usize,
    upper: Vec<f64>,
}

fn weight(r: usize) -> impl Iterator<Item = f64> {
    (0..r).flat_map(move |i| (i..r).map(move |j| if i == j { 1.0 } else { SQRT_2 }))
}

impl VecHalf {
    pub fn from_coords(r: usize, coords: Vec<f64>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        check_dim(half_dim(r), coords.len())?;
        let upper = coords.iter().zip(weight(r)).map(|(c, w)| c / w).collect();
        Ok(VecHalf { r, upper })
    }

    /// Matrix dimension `r`.
    pub fn matrix_dim(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn coords(&self) -> Vec<f64> {
        self.upper.iter().zip(weight(self.r)).map(|(x, w)| x * w).collect()
    }

    pub fn inner(&self, other: &VecHalf) -> f64 {
        assert_eq!(self.r, other.r);
        self.upper
            .iter()
            .zip(&other.upper)
            .zip(weight(self.r))
            .map(|((a, b), w)| w * w * a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

pub fn vech(h: &SymMat) -> VecHalf {
    VecHalf { r: h.dim(), upper: h.packed().to_vec() }
}

pub fn unvech(v: &VecHalf) -> SymMat {
    SymMat::from_packed(v.r, v.upper.clone()).expect("length checked at construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::testutil::random_sym;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_example() {
        let h = SymMat::from_row_slice(2, &[1.0, 2.0, 2.0, 3.0]).unwrap();
        let v = vech(&h);
        assert_eq!(v.coords(), vec![1.0, 2.0 * SQRT_2, 3.0]);
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(VecHalf::from_coords(3, vec![0.0; 5]).is_err());
        assert!(VecHalf::from_coords(0, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(seed in any::<u64>(), r in 1usize..7) {
            let mut rng = rng_from_seed(seed);
            let h = random_sym(&mut rng, r);
            prop_assert_eq!(unvech(&vech(&h)), h);
        }

        #[test]
        fn isometry(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let a = random_sym(&mut rng, 3);
            let b = random_sym(&mut rng, 3);
            let tr = (a.to_dense() * b.to_dense()).trace();
            let ip = vech(&a).inner(&vech(&b));
            prop_assert!((ip - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
            let dot: f64 = vech(&a).coords().iter().zip(vech(&b).coords()).map(|(x, y)| x * y).sum();
            prop_assert!((dot - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
        }
    }
}
