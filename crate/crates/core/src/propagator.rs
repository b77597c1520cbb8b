//! Unitary time stepping for the driven mode system and its linearization.
//!
//! The state obeys i dz/dt = (Lambda + u(t) Q) z on the truncated basis,
//! with Lambda the diagonal of eigenvalues and Q the coupling matrix. One
//! step of [`propagate`] is the symmetric splitting
//!
//!   z <- e^{-i Lambda dt/2} e^{-i u* dt Q} e^{-i Lambda dt/2} z
//!
//! with u* the midpoint control value. The coupling exponential acts through
//! a one-time orthogonal diagonalization Q = W D W^T, so every factor is
//! unitary and the step is second-order accurate. Phases use the operator's
//! physical eigenvalues; any gauge shift of the spectrum only rotates the
//! state by a global phase and is left out of the dynamics.
//!
//! [`linearized_propagate`] integrates the first variation of the flow
//! around the free trajectory of a profile state: its mode coefficients are
//! oscillatory integrals of the control, accumulated by the trapezoid rule
//! with incrementally rotated phases.

use alloc::vec;
use alloc::vec::Vec;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, orthonormal_polish};
use crate::signal::Control;
use crate::spectral::{hs_norm, StateCoeffs};
use crate::C64;
#[allow(unused_imports)]
use num_traits::Float as _;

/// Recorded output of a propagation run.
///
/// States are stored every `stride` steps (plus the final step); the norm
/// ledgers are dense, one entry per integration step starting at t = 0, so
/// conservation can be audited at full resolution. Entry i of a ledger
/// belongs to time i * dt with the actual step returned by [`Trajectory::dt`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    dt: f64,
    lambdas: Vec<f64>,
    times: Vec<f64>,
    states: Vec<StateCoeffs>,
    l2_norms: Vec<f64>,
    h3_norms: Vec<f64>,
}

impl Trajectory {
    /// The integration step actually used (evenly divides the horizon).
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Mode frequencies of the run (ungauged), one per coefficient.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Times of the recorded states.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Recorded states, aligned with [`Trajectory::times`].
    pub fn states(&self) -> &[StateCoeffs] {
        &self.states
    }

    /// L2 norm at every integration step.
    pub fn l2_norms(&self) -> &[f64] {
        &self.l2_norms
    }

    /// Weighted Sobolev norm of order 3 at every integration step, using
    /// the gauge-shifted eigenvalues as weights.
    pub fn h3_norms(&self) -> &[f64] {
        &self.h3_norms
    }

    /// The last recorded state.
    pub fn final_state(&self) -> &StateCoeffs {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Largest deviation of the L2 ledger from its initial value.
    pub fn l2_drift(&self) -> f64 {
        let first = self.l2_norms[0];
        self.l2_norms
            .iter()
            .map(|v| (v - first).abs())
            .fold(0.0, f64::max)
    }
}

/// Free flow: multiply mode k by e^{-i lambda_k t}. Negative times unwind.
pub fn free_evolution(z: &StateCoeffs, lambdas: &[f64], t: f64) -> StateCoeffs {
    assert_eq!(z.len(), lambdas.len(), "state and spectrum sizes differ");
    let coeffs = z
        .coeffs()
        .iter()
        .zip(lambdas)
        .map(|(c, l)| c * C64::from_polar(1.0, -l * t))
        .collect();
    StateCoeffs::new(coeffs)
}

struct StepPlan {
    n_steps: usize,
    dt: f64,
}

fn plan_steps(n: usize, z0: &StateCoeffs, t_final: f64, dt: f64) -> Result<StepPlan> {
    if z0.len() != n {
        return Err(Error::Invalid(alloc::format!(
            "state has {} modes, coupling has {n}",
            z0.len()
        )));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::Invalid(alloc::format!("bad horizon {t_final}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Invalid(alloc::format!("bad step {dt}")));
    }
    if !z0.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let n_steps = if t_final == 0.0 {
        0
    } else {
        (t_final / dt).ceil().max(1.0) as usize
    };
    let dt = if n_steps == 0 { dt } else { t_final / n_steps as f64 };
    Ok(StepPlan { n_steps, dt })
}

/// Integrate i dz/dt = (Lambda + u(t) Q) z from `z0` over [0, t_final].
///
/// The requested step is shrunk so that it divides `t_final` evenly. States
/// are recorded every `stride` steps plus the endpoint; norm ledgers are
/// dense. Steps whose midpoint control vanishes skip the coupling kick, so
/// free flight segments stay exactly diagonal.
pub fn propagate(
    z0: &StateCoeffs,
    u: &impl Control,
    c: &CouplingMatrix,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::Invalid("stride must be at least 1".into()));
    }
    let n = c.n();
    let plan = plan_steps(n, z0, t_final, dt)?;
    let dt = plan.dt;
    let lambdas = c.physical_lambdas();
    let weights = c.lambdas();

    // One-time orthogonal diagonalization Q = W D W^T. Polishing W to the
    // orthogonality rounding floor keeps the norm drift of long runs at the
    // f64 accumulation level.
    let (kick_eigs, mut w) = jacobi_eigh(c.entries(), n);
    orthonormal_polish(&mut w, n);
    let half: Vec<C64> = lambdas
        .iter()
        .map(|l| C64::from_polar(1.0, -0.5 * l * dt))
        .collect();

    let mut z: Vec<C64> = z0.coeffs().to_vec();
    let mut work = vec![C64::new(0.0, 0.0); n];
    let mut traj = Trajectory {
        dt,
        lambdas: lambdas.clone(),
        times: vec![0.0],
        states: vec![z0.clone()],
        l2_norms: Vec::with_capacity(plan.n_steps + 1),
        h3_norms: Vec::with_capacity(plan.n_steps + 1),
    };
    let state = StateCoeffs::new(z.clone());
    traj.l2_norms.push(state.l2_norm());
    traj.h3_norms.push(hs_norm(&state, weights, 3.0));

    for step in 0..plan.n_steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let u_mid = u.value(t_mid);
        if !u_mid.is_finite() {
            return Err(Error::NonFinite("control sample"));
        }
        for (zk, hk) in z.iter_mut().zip(&half) {
            *zk *= hk;
        }
        if u_mid != 0.0 {
            // work = W^T z; kick; z = W work.
            for col in 0..n {
                let wcol = &w[col * n..(col + 1) * n];
                let mut acc = C64::new(0.0, 0.0);
                for (vi, zi) in wcol.iter().zip(&z) {
                    acc += zi * *vi;
                }
                work[col] = acc * C64::from_polar(1.0, -u_mid * dt * kick_eigs[col]);
            }
            for zi in z.iter_mut() {
                *zi = C64::new(0.0, 0.0);
            }
            for col in 0..n {
                let wcol = &w[col * n..(col + 1) * n];
                let wc = work[col];
                for (zi, vi) in z.iter_mut().zip(wcol) {
                    *zi += wc * *vi;
                }
            }
        }
        for (zk, hk) in z.iter_mut().zip(&half) {
            *zk *= hk;
        }

        let state = StateCoeffs::new(z.clone());
        traj.l2_norms.push(state.l2_norm());
        traj.h3_norms.push(hs_norm(&state, weights, 3.0));
        let done = step + 1 == plan.n_steps;
        if (step + 1) % stride == 0 || done {
            traj.times.push((step + 1) as f64 * dt);
            traj.states.push(state);
        }
    }
    Ok(traj)
}

/// Integrate the first variation of the flow around the free trajectory of
/// `ztilde` under the control `u`, recording the variation state at every
/// step.
///
/// Mode m of the variation at time t is
///
///   -i e^{-i lambda_m t} sum_k c_k Q_mk int_0^t u(s) e^{i omega_mk s} ds,
///
/// accumulated with the trapezoid rule. The variation stays orthogonal to
/// the free trajectory in the real inner product whenever the profile is
/// normalized (first-order norm conservation).
pub fn linearized_propagate(
    ztilde: &StateCoeffs,
    u: &impl Control,
    c: &CouplingMatrix,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = c.n();
    let plan = plan_steps(n, ztilde, t_final, dt)?;
    let dt = plan.dt;
    let lambdas = c.physical_lambdas();
    let weights = c.lambdas();

    // Oscillatory integrals I_mk accumulate in `integrals`; the integrand at
    // the current node is u(t) p_m conj(p_k) with p_m = e^{i lambda_m t}.
    let mut integrals = vec![C64::new(0.0, 0.0); n * n];
    let mut phases: Vec<C64> = vec![C64::new(1.0, 0.0); n];
    let rot: Vec<C64> = lambdas
        .iter()
        .map(|l| C64::from_polar(1.0, l * dt))
        .collect();
    let mut u_prev = u.value(0.0);
    if !u_prev.is_finite() {
        return Err(Error::NonFinite("control sample"));
    }
    let mut prev_phases = phases.clone();

    let mut traj = Trajectory {
        dt,
        lambdas: lambdas.clone(),
        times: Vec::with_capacity(plan.n_steps + 1),
        states: Vec::with_capacity(plan.n_steps + 1),
        l2_norms: Vec::with_capacity(plan.n_steps + 1),
        h3_norms: Vec::with_capacity(plan.n_steps + 1),
    };

    let record = |traj: &mut Trajectory, t: f64, integrals: &[C64]| {
        let mut coeffs = vec![C64::new(0.0, 0.0); n];
        for (m, cm) in coeffs.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (k, ck) in ztilde.coeffs().iter().enumerate() {
                acc += ck * c.q(m, k) * integrals[m * n + k];
            }
            // -i e^{-i lambda_m t} acc
            *cm = C64::new(0.0, -1.0) * C64::from_polar(1.0, -lambdas[m] * t) * acc;
        }
        let state = StateCoeffs::new(coeffs);
        traj.times.push(t);
        traj.l2_norms.push(state.l2_norm());
        traj.h3_norms.push(hs_norm(&state, weights, 3.0));
        traj.states.push(state);
    };

    record(&mut traj, 0.0, &integrals);
    for step in 0..plan.n_steps {
        let t_next = (step + 1) as f64 * dt;
        for (p, r) in phases.iter_mut().zip(&rot) {
            *p *= r;
        }
        let u_next = u.value(t_next);
        if !u_next.is_finite() {
            return Err(Error::NonFinite("control sample"));
        }
        for m in 0..n {
            for k in 0..n {
                let prev = u_prev * prev_phases[m] * prev_phases[k].conj();
                let next = u_next * phases[m] * phases[k].conj();
                integrals[m * n + k] += (prev + next) * (0.5 * dt);
            }
        }
        prev_phases.copy_from_slice(&phases);
        u_prev = u_next;
        record(&mut traj, t_next, &integrals);
    }
    Ok(traj)
}
