//! Deterministic and stochastic matrix Riccati flows.
//!
//! Conventions: `Θ(P) = AP + PAᵀ + R − PSP`, the diffusion solves
//! `dQ = Θ(Q)dt + ε[Q^{1/2} dW Σ(Q)^{1/2}]_sym` with
//! `Σ(Q) = R + κ(Q+ϖI)S(Q+ϖI)`, and `E_t` is the semigroup of
//! `A − Q_t S`.

mod bounds;
mod fixed_point;
mod flow;
mod params;
mod sde;
mod thresholds;

pub use bounds::{forward_coefficients, inverse_trace_bound, trace_moment_bound, ScalarRiccati, TraceBound};
pub use fixed_point::{lyapunov_solve, solve_fixed_point, solve_fixed_point_hamiltonian, solve_fixed_point_newton};
pub use flow::{
    comparison_upper_bound, det_flow_at, det_flow_endpoint, integrate_det_flow, integrate_det_flow_euler, DetFlow,
};
pub use params::{drift_theta, sigma_map, uv_bound, Kappa, ModelParams};
pub use sde::{
    eps_bar, error_diffusion, inverse_drift, inverse_drift_bound, simulate_error_process, simulate_inverse_path,
    simulate_path, simulate_path_sampled, simulate_path_vech, vech_state, EulerStepper, InversePath, InverseStepper,
    RiccatiPath, SampledPath, Scheme, BLOWUP_GUARD,
};
pub use thresholds::{thresholds, Threshold, Thresholds};

pub(crate) use flow::step_grid;
pub(crate) use params::{sigma_unchecked, theta_dense};
