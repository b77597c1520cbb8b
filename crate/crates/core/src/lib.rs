#![cfg_attr(not(feature = "std"), no_std)]
//! Numerics for steering a bilinear Schrodinger model on the unit interval.
//!
//! The model is i dz/dt = (-d2/dx2 + V(x)) z + u(t) Q(x) z with Dirichlet
//! walls, truncated to the lowest modes of the potential's spectral basis.
//! The crate provides:
//!
//! - [`spectral`]: Sturm-Liouville eigenpairs on a uniform grid, weighted
//!   Sobolev-type norms, spectral asymptotics diagnostics, tensor products
//!   for rectangular boxes in higher dimension;
//! - [`coupling`]: coupling matrices `<Q e_m, e_k>`, non-degeneracy and
//!   non-resonance checks, and the two-mode obstruction functional;
//! - [`signal`]: raised-cosine control signals, oscillatory moments
//!   of a control, and the layered control norm used in reports;
//! - [`propagator`]: unitary split-step propagation and the linearized flow;
//! - [`return_times`]: near-return times of the free flow;
//! - [`moments`]: the moment tables that realize a tangent target through
//!   the linearized flow, and least-squares control synthesis;
//! - [`steering`]: sphere chart maps and the Newton steering loop;
//! - [`entropy`]: reachable-cloud sampling and covering-number slopes.
//!
//! Everything is deterministic: randomized routines take an explicit seed.
//! The crate is no_std-compatible (with `alloc`); disable default features
//! and enable `libm` for builds without the standard library.

extern crate alloc;

/// Complex double, the scalar type of every state coefficient.
pub type C64 = num_complex::Complex64;

pub mod coupling;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod moments;
pub mod propagator;
pub mod steering;
pub mod return_times;
pub mod signal;
pub mod spectral;

pub use coupling::{check_condition_i, check_condition_ii, coupling_matrix, coupling_matrix_nd, e_set_defect, ConditionReport, CouplingFloor, CouplingMatrix, Resonance, ResonanceScan};
pub use entropy::{
    covering_number, entropy_report, reachable_cloud, sample_control_ball,
    ControlBallSample, EntropyConfig, EntropyReport,
};
pub use error::{Error, Result};
pub use moments::{
    linearized_endpoint, obstruction_invariant, synthesize_control,
    target_to_moments, MomentCase, MomentTable, SynthesisReport,
};
pub use steering::{
    lift, newton_control, project_tangent, NewtonConfig, SteeringIterate,
    SteeringRun, SteeringStatus,
};
pub use propagator::{free_evolution, linearized_propagate, propagate, Trajectory};
pub use return_times::{find_return_time, verify_return, ReturnCheck, ReturnTime};
pub use signal::{fourier_moment, theta_norm, Control, ControlSignal, PiecewiseLinear, ThetaNorm};
pub use spectral::{check_asymptotics, hs_norm, solve_sturm_liouville, tensor_eigensystem, v_norm, AsymptoticsReport, EigenSystem, EigenSystemNd, Potential, StateCoeffs};
