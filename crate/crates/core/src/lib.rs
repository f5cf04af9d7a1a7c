//! Matrix-valued Riccati diffusions and ensemble Kalman-Bucy filters.
//!
//! The crate is organised bottom-up:
//!
//! - [`matcore`]: symmetric matrices, spectral utilities, the half-vectorisation
//!   isometry, symmetric tensor embeddings and spectrum metrics.
//! - [`riccati`]: the deterministic Riccati flow, its fixed point, the matrix
//!   Riccati diffusion and its inverse, the stochastic exponential semigroup,
//!   noise thresholds and comparison bounds.
//! - [`dyson`]: eigenvalue dynamics of the diffusion.
//! - [`enkf`]: linear-Gaussian truth simulation, the Kalman-Bucy filter and the
//!   two ensemble Kalman-Bucy particle systems.
//! - [`mc`]: Monte Carlo estimators with batch-means error bars.
//! - [`cli`]: configuration parsing, experiment runners and reports behind the
//!   `riccdiff` binary.

pub mod cli;
pub mod dyson;
pub mod enkf;
mod error;
pub mod matcore;
pub mod mc;
pub mod riccati;
pub mod rng;

pub use error::{Error, Result};
pub use matcore::{SpectralDecomp, SymMat, VecHalf};
pub use riccati::{Kappa, ModelParams, Threshold, Thresholds};
