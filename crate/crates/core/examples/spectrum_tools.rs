//! Symmetric-matrix utilities: half-vectorisation, tensor embedding and
//! spectral perturbation measures.

use nalgebra::DMatrix;
use riccdiff::matcore::{hw_gap, spectrum_distance, sym_tensor_embed, trace_inequality_gap, unvech, vech};
use riccdiff::SymMat;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = SymMat::from_row_slice(3, &[2.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 0.7])?;
    let v = vech(&h);
    println!("vech(H) = {:.4?}, |H|_F = {:.4}, |vech H| = {:.4}", v.coords(), h.frob_norm(), v.norm());
    assert_eq!(unvech(&v), h);

    let q = SymMat::from_diag(&[1.0, 2.0, 3.0]);
    let emb = SymMat::sym_part(&sym_tensor_embed(&q, &h.add_diag(1.0))?);
    println!("spectrum of Q ⊗ₛ (H+I): {:.4?}", emb.eigenvalues());

    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
    let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.1, 0.9]));
    println!("spectrum distance {:.4}", spectrum_distance(&a, &b)?);
    println!("Hoffman-Wielandt gap {:.4}", hw_gap(&h, &q)?);
    println!("trace inequality gap {:.4}", trace_inequality_gap(&q, &h.add_diag(1.0), &SymMat::identity(3))?);
    Ok(())
}
