//! Newton steering on the unit sphere of mode coefficients.
//!
//! The sphere is charted at a base profile z~ by the tangent projector
//! P z = z - Re<z, z~> z~ and the lift w -> sqrt(1 - |w|^2) z~ + w. A
//! steering run repeats: propagate the accumulated control, pull the
//! endpoint back by the free flow (the co-rotating frame), project the
//! remaining gap onto the tangent space at z~, invert it to a moment table,
//! fit a control increment, and accumulate. Each iteration's weighted error,
//! layered control size, and moment-fit residual are recorded.

use alloc::format;
use alloc::vec::Vec;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::moments::{synthesize_control, target_to_moments};
use crate::propagator::{free_evolution, propagate};
use crate::return_times::find_return_time;
use crate::signal::{theta_norm, ControlSignal};
use crate::spectral::{hs_norm, StateCoeffs};
use crate::C64;
#[allow(unused_imports)]
use num_traits::Float as _;

/// Chart radius: lifts are rejected when the tangent vector reaches it.
const CHART_RADIUS: f64 = 0.5;

/// Modes with squared weight below this are ignored by the return-time scan.
const POPULATION_FLOOR: f64 = 1e-8;

/// Smoothness order of the error ledger.
const ERROR_ORDER: f64 = 3.0;

/// Component of `z` tangent to the sphere at the unit profile `ztilde`:
/// P z = z - Re<z, ztilde> ztilde. The result's radial part vanishes to
/// rounding. `ztilde` must be normalized within 1e-8.
pub fn project_tangent(z: &StateCoeffs, ztilde: &StateCoeffs) -> StateCoeffs {
    assert_eq!(z.len(), ztilde.len(), "state sizes differ");
    debug_assert!(
        (ztilde.l2_norm() - 1.0).abs() <= 1e-8,
        "projector base must be a unit profile"
    );
    let r = z.inner(ztilde).re;
    let coeffs = z
        .coeffs()
        .iter()
        .zip(ztilde.coeffs())
        .map(|(zm, bm)| zm - bm * r)
        .collect();
    StateCoeffs::new(coeffs)
}

/// Lift a tangent vector back to the sphere:
/// sqrt(1 - |w|^2) ztilde + w.
///
/// Requires |w| below the chart radius 1/2 (`OutOfChart` otherwise), `w`
/// tangent within 1e-8, and `ztilde` normalized within 1e-8. The lift is
/// normalized within 1e-12 and projecting it back returns `w` within 1e-12.
pub fn lift(w: &StateCoeffs, ztilde: &StateCoeffs) -> Result<StateCoeffs> {
    if w.len() != ztilde.len() {
        return Err(Error::Invalid(format!(
            "tangent vector has {} modes, profile {}",
            w.len(),
            ztilde.len()
        )));
    }
    if (ztilde.l2_norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Invalid(format!(
            "chart base norm {} is not 1",
            ztilde.l2_norm()
        )));
    }
    let norm = w.l2_norm();
    if !norm.is_finite() {
        return Err(Error::NonFinite("tangent vector"));
    }
    if norm >= CHART_RADIUS {
        return Err(Error::OutOfChart {
            norm,
            delta: CHART_RADIUS,
        });
    }
    if w.inner(ztilde).re.abs() > 1e-8 {
        return Err(Error::Invalid(format!(
            "vector is not tangent: radial part {:.3e}",
            w.inner(ztilde).re
        )));
    }
    let radial = (1.0 - norm * norm).sqrt();
    let coeffs = w
        .coeffs()
        .iter()
        .zip(ztilde.coeffs())
        .map(|(wm, bm)| wm + bm * radial)
        .collect();
    Ok(StateCoeffs::new(coeffs))
}

/// Tuning knobs of a steering run.
#[derive(Clone, Debug)]
pub struct NewtonConfig {
    /// Convergence threshold on the weighted error.
    pub tol: f64,
    /// Maximum number of Newton corrections.
    pub max_iter: usize,
    /// Horizon of the synthesized control.
    pub t_synth: f64,
    /// Atoms in the control bank. The bank bandwidth pi (n_atoms + 1) /
    /// t_synth must clear the dominant mode gaps or the fit turns wasteful.
    pub n_atoms: usize,
    /// Tikhonov weight of the moment fits.
    pub rho: f64,
    /// Propagation step.
    pub dt: f64,
    /// Defect threshold for the reported return time.
    pub return_eps: f64,
    /// Upper bound of the return-time scan.
    pub k_max: u64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-6,
            max_iter: 8,
            t_synth: 40.0,
            n_atoms: 450,
            rho: 1e-10,
            dt: 1e-3,
            return_eps: 0.05,
            k_max: 1_000_000,
        }
    }
}

/// How a steering run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteeringStatus {
    /// The weighted error dropped below the tolerance.
    Converged,
    /// The correction budget ran out with the error still above tolerance.
    MaxIterations,
}

/// One evaluation of the accumulated control.
#[derive(Clone, Copy, Debug)]
pub struct SteeringIterate {
    /// Weighted (order 3) co-rotating endpoint error against the target.
    pub error_h3: f64,
    /// Layered size of the accumulated control at this point.
    pub theta: f64,
    /// Largest moment-fit residual of the correction that produced the
    /// current control (0 for the initial evaluation).
    pub residual: f64,
}

/// Record of a steering run.
#[derive(Clone, Debug)]
pub struct SteeringRun {
    /// Start profile (the chart base).
    pub z0: StateCoeffs,
    /// Target profile.
    pub z1: StateCoeffs,
    /// Final status.
    pub status: SteeringStatus,
    /// Reported return time of the populated spectrum.
    pub k_return: u64,
    /// Whether the return defect met the requested threshold.
    pub return_found: bool,
    /// Phase defect of the populated spectrum at the return time.
    pub return_defect: f64,
    /// Weighted (order 3) size of the residual phases on the target at the
    /// return time; the raw-frame error is bounded by the final iterate's
    /// error plus this.
    pub phase_mismatch_h3: f64,
    /// One entry per evaluation, the initial one first.
    pub iterates: Vec<SteeringIterate>,
    /// The accumulated control.
    pub control: ControlSignal,
}

impl SteeringRun {
    /// Errors of the recorded evaluations, in order.
    pub fn errors(&self) -> Vec<f64> {
        self.iterates.iter().map(|it| it.error_h3).collect()
    }
}

/// Steer `z0` toward `z1` by Newton corrections in the chart at z~ = z0.
///
/// Each pass propagates the accumulated control over the synthesis horizon,
/// pulls the endpoint back by the free flow, measures the weighted gap to
/// `z1`, and if above tolerance inverts the tangent gap to a moment table
/// and accumulates the fitted correction. The frozen chart base makes every
/// pass solve the same linearization, so the error contracts while the gap
/// stays inside the chart.
///
/// Errors: `ObstructedState` when the base profile is a balanced two-mode
/// state (no table exists); `Diverged` after three consecutive evaluations
/// without error decrease; `IllConditioned` from the fit; `Invalid` for
/// off-sphere inputs or bad configuration.
pub fn newton_control(
    z0: &StateCoeffs,
    z1: &StateCoeffs,
    c: &CouplingMatrix,
    cfg: &NewtonConfig,
) -> Result<SteeringRun> {
    let n = c.n();
    if z0.len() != n || z1.len() != n {
        return Err(Error::Invalid(format!(
            "states have {} / {} modes, coupling has {n}",
            z0.len(),
            z1.len()
        )));
    }
    for (name, z) in [("start", z0), ("target", z1)] {
        if !z.coeffs().iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("steering endpoint"));
        }
        if (z.l2_norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Invalid(format!(
                "{name} profile norm {} is not 1",
                z.l2_norm()
            )));
        }
    }
    if !(cfg.tol > 0.0 && cfg.tol.is_finite())
        || cfg.max_iter == 0
        || !(cfg.t_synth > 0.0 && cfg.t_synth.is_finite())
        || cfg.n_atoms == 0
        || !(cfg.rho >= 0.0 && cfg.rho.is_finite())
        || !(cfg.dt > 0.0 && cfg.dt.is_finite())
        || !(cfg.return_eps > 0.0 && cfg.return_eps.is_finite())
        || cfg.k_max == 0
    {
        return Err(Error::Invalid("bad steering configuration".into()));
    }

    let ztilde = z0.normalized()?;
    let phys = c.physical_lambdas();
    let gauged = c.lambdas();

    // Return time of the populated spectrum, for the run record: the raw
    // endpoint differs from the co-rotating one by phases that nearly close
    // at that time.
    let populated: Vec<f64> = (0..n)
        .filter(|&j| {
            z0.coeffs()[j].norm_sqr() + z1.coeffs()[j].norm_sqr()
                > POPULATION_FLOOR
        })
        .map(|j| phys[j])
        .collect();
    let rt = find_return_time(&populated, cfg.return_eps, cfg.k_max)?;
    let t_ret = rt.k as f64;
    let phase_mismatch_h3 = z1
        .coeffs()
        .iter()
        .enumerate()
        .map(|(m, zm)| {
            let miss =
                (C64::from_polar(1.0, -phys[m] * t_ret) - 1.0).norm_sqr();
            gauged[m].powi(3) * miss * zm.norm_sqr()
        })
        .sum::<f64>()
        .sqrt();

    let mut u = ControlSignal::new(cfg.t_synth, cfg.n_atoms)?;
    let mut iterates: Vec<SteeringIterate> = Vec::new();
    let mut last_residual = 0.0;
    let mut stall = 0usize;
    let mut status = SteeringStatus::MaxIterations;

    for correction in 0..=cfg.max_iter {
        let traj = propagate(z0, &u, c, cfg.t_synth, cfg.dt, usize::MAX)?;
        let w = free_evolution(traj.final_state(), &phys, -cfg.t_synth);
        let gap = StateCoeffs::new(
            z1.coeffs()
                .iter()
                .zip(w.coeffs())
                .map(|(a, b)| a - b)
                .collect(),
        );
        let error_h3 = hs_norm(&gap, gauged, ERROR_ORDER);
        let theta = theta_norm(&u, c, 1.0)?;
        if let Some(prev) = iterates.last() {
            if error_h3 >= prev.error_h3 {
                stall += 1;
            } else {
                stall = 0;
            }
        }
        iterates.push(SteeringIterate {
            error_h3,
            theta: theta.total(),
            residual: last_residual,
        });
        if error_h3 <= cfg.tol {
            status = SteeringStatus::Converged;
            break;
        }
        if stall >= 3 {
            return Err(Error::Diverged {
                at_iter: correction,
                error: error_h3,
            });
        }
        if correction == cfg.max_iter {
            break;
        }
        let y = project_tangent(&gap, &ztilde);
        let table = target_to_moments(&ztilde, &y, c)?;
        let (du, report) =
            synthesize_control(&table, cfg.t_synth, cfg.n_atoms, cfg.rho)?;
        u.accumulate(&du)?;
        last_residual = report.max_residual;
    }

    Ok(SteeringRun {
        z0: z0.clone(),
        z1: z1.clone(),
        status,
        k_return: rt.k,
        return_found: rt.found,
        return_defect: rt.defect,
        phase_mismatch_h3,
        iterates,
        control: u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::coupling_matrix;
    use crate::spectral::{solve_sturm_liouville, Potential};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box_coupling(n: usize, n_grid: usize) -> CouplingMatrix {
        let v = Potential::zero(n_grid + 1);
        let eig = solve_sturm_liouville(&v, n, n_grid).unwrap();
        let profile = Potential::from_fn(n_grid + 1, |x| x * x).unwrap();
        coupling_matrix(&profile, &eig, n).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateCoeffs {
        StateCoeffs::new(
            (0..n)
                .map(|_| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
                .collect(),
        )
    }

    #[test]
    fn projector_annihilates_the_base_and_keeps_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zt = random_state(&mut rng, 6).normalized().unwrap();
        // The base itself projects to zero.
        let p0 = project_tangent(&zt, &zt);
        assert!(p0.l2_norm() <= 1e-15);
        // i ztilde is tangent (a phase rotation direction) and is kept.
        let izt = StateCoeffs::new(
            zt.coeffs().iter().map(|v| C64::i() * v).collect(),
        );
        let p1 = project_tangent(&izt, &zt);
        let diff: f64 = p1
            .coeffs()
            .iter()
            .zip(izt.coeffs())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-15);
        // A random vector becomes tangent to rounding.
        for _ in 0..5 {
            let z = random_state(&mut rng, 6);
            let p = project_tangent(&z, &zt);
            assert!(p.inner(&zt).re.abs() <= 1e-14);
            // Projecting twice changes nothing.
            let pp = project_tangent(&p, &zt);
            let d: f64 = pp
                .coeffs()
                .iter()
                .zip(p.coeffs())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(d <= 1e-15);
        }
    }

    #[test]
    fn chart_round_trips_and_guards_its_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let zt = random_state(&mut rng, 5).normalized().unwrap();
        let w = {
            let raw = project_tangent(&random_state(&mut rng, 5), &zt);
            let scale = 0.3 / raw.l2_norm();
            StateCoeffs::new(raw.coeffs().iter().map(|v| v * scale).collect())
        };
        let lifted = lift(&w, &zt).unwrap();
        assert!((lifted.l2_norm() - 1.0).abs() <= 1e-12);
        let back = project_tangent(&lifted, &zt);
        let d: f64 = back
            .coeffs()
            .iter()
            .zip(w.coeffs())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(d <= 1e-12, "round trip error {d:.3e}");

        // At the chart radius the lift refuses.
        let big = StateCoeffs::new(
            w.coeffs().iter().map(|v| v * (0.6 / 0.3)).collect(),
        );
        match lift(&big, &zt) {
            Err(Error::OutOfChart { norm, delta }) => {
                assert!((norm - 0.6).abs() <= 1e-12);
                assert_eq!(delta, 0.5);
            }
            other => panic!("expected out-of-chart, got {other:?}"),
        }
        // Non-tangent vectors are rejected.
        let skew = StateCoeffs::new(
            zt.coeffs().iter().map(|v| v * 0.1).collect(),
        );
        assert!(lift(&skew, &zt).is_err());
        // Off-sphere base is rejected.
        let off = StateCoeffs::new(
            zt.coeffs().iter().map(|v| v * 1.1).collect(),
        );
        assert!(lift(&w, &off).is_err());
    }

    #[test]
    fn already_on_target_converges_without_corrections() {
        let c = box_coupling(3, 512);
        let z0 = StateCoeffs::basis(3, 0);
        let cfg = NewtonConfig {
            t_synth: 2.0,
            n_atoms: 20,
            dt: 1e-2,
            ..NewtonConfig::default()
        };
        let run = newton_control(&z0, &z0, &c, &cfg).unwrap();
        assert_eq!(run.status, SteeringStatus::Converged);
        assert_eq!(run.iterates.len(), 1);
        assert!(run.iterates[0].error_h3 <= 1e-10);
        assert!(run.iterates[0].theta == 0.0);
        assert!(run.control.weights().iter().all(|w| *w == 0.0));
    }

    #[test]
    fn small_perturbation_contracts_and_converges() {
        let n = 4;
        let c = box_coupling(n, 1024);
        let z0 = StateCoeffs::basis(n, 0);
        // Tangent perturbation of weighted (order 3) size 1e-3.
        let raw = StateCoeffs::new(vec![
            C64::new(0.0, 1.0),
            C64::new(1.0, 0.5),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]);
        let dir = project_tangent(&raw, &z0);
        let scale = 1e-3 / hs_norm(&dir, c.lambdas(), 3.0);
        let z1 = StateCoeffs::new(
            z0.coeffs()
                .iter()
                .zip(dir.coeffs())
                .map(|(a, b)| a + b * scale)
                .collect(),
        )
        .normalized()
        .unwrap();
        let cfg = NewtonConfig {
            tol: 1e-6,
            t_synth: 8.0,
            n_atoms: 80,
            dt: 1e-3,
            ..NewtonConfig::default()
        };
        let run = newton_control(&z0, &z1, &c, &cfg).unwrap();
        assert_eq!(run.status, SteeringStatus::Converged);
        let errs = run.errors();
        assert!(errs.len() >= 2, "at least one correction expected");
        assert!(
            *errs.last().unwrap() <= errs[0] / 10.0,
            "no tenfold reduction: {errs:?}"
        );
        // Monotone contraction by at least 0.7 per correction.
        for pair in errs.windows(2) {
            assert!(
                pair[1] <= 0.7 * pair[0] + 1e-12,
                "weak contraction: {errs:?}"
            );
        }
        // The control stays small in the layered norm.
        let last = run.iterates.last().unwrap();
        assert!(last.theta < 1.0, "theta {}", last.theta);
    }

    #[test]
    fn steering_is_invariant_under_a_global_phase() {
        let n = 3;
        let c = box_coupling(n, 512);
        let z0 = StateCoeffs::basis(n, 0);
        let raw = StateCoeffs::new(vec![
            C64::new(0.0, 1.0),
            C64::new(0.7, -0.2),
            C64::new(0.0, 0.0),
        ]);
        let dir = project_tangent(&raw, &z0);
        let scale = 1e-3 / hs_norm(&dir, c.lambdas(), 3.0);
        let z1 = StateCoeffs::new(
            z0.coeffs()
                .iter()
                .zip(dir.coeffs())
                .map(|(a, b)| a + b * scale)
                .collect(),
        )
        .normalized()
        .unwrap();
        let cfg = NewtonConfig {
            tol: 1e-8,
            max_iter: 4,
            t_synth: 4.0,
            n_atoms: 40,
            dt: 2e-3,
            ..NewtonConfig::default()
        };
        let base = newton_control(&z0, &z1, &c, &cfg).unwrap();
        let phase = C64::from_polar(1.0, 1.234);
        let z0p = StateCoeffs::new(
            z0.coeffs().iter().map(|v| v * phase).collect(),
        );
        let z1p = StateCoeffs::new(
            z1.coeffs().iter().map(|v| v * phase).collect(),
        );
        let rot = newton_control(&z0p, &z1p, &c, &cfg).unwrap();
        assert_eq!(base.iterates.len(), rot.iterates.len());
        for (a, b) in base.iterates.iter().zip(&rot.iterates) {
            assert!((a.error_h3 - b.error_h3).abs() <= 1e-10);
        }
        let wdiff: f64 = base
            .control
            .weights()
            .iter()
            .zip(rot.control.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(wdiff <= 1e-10, "controls differ by {wdiff:.3e}");
    }

    #[test]
    fn distant_target_fails_honestly() {
        let n = 3;
        let c = box_coupling(n, 512);
        let z0 = StateCoeffs::basis(n, 0);
        // A target 0.3 away in the plain norm, far outside the linear regime.
        let z1 = StateCoeffs::new(vec![
            C64::new((1.0f64 - 0.09).sqrt(), 0.0),
            C64::new(0.0, 0.3),
            C64::new(0.0, 0.0),
        ]);
        let cfg = NewtonConfig {
            tol: 1e-9,
            max_iter: 3,
            t_synth: 3.0,
            n_atoms: 30,
            dt: 2e-3,
            ..NewtonConfig::default()
        };
        match newton_control(&z0, &z1, &c, &cfg) {
            Ok(run) => assert_ne!(run.status, SteeringStatus::Converged),
            Err(Error::Diverged { .. }) => {}
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn obstructed_base_is_reported() {
        let n = 3;
        let c = box_coupling(n, 512);
        let w0 = c.q(1, 1) / (c.q(0, 0) + c.q(1, 1));
        let z0 = StateCoeffs::new(vec![
            C64::new(w0.sqrt(), 0.0),
            C64::new(0.0, (1.0 - w0).sqrt()),
            C64::new(0.0, 0.0),
        ]);
        let dir = project_tangent(
            &StateCoeffs::new(vec![
                C64::new(0.1, 0.0),
                C64::new(0.0, -0.2),
                C64::new(0.05, 0.05),
            ]),
            &z0,
        );
        let scale = 1e-3 / dir.l2_norm();
        let z1 = StateCoeffs::new(
            z0.coeffs()
                .iter()
                .zip(dir.coeffs())
                .map(|(a, b)| a + b * scale)
                .collect(),
        )
        .normalized()
        .unwrap();
        let cfg = NewtonConfig {
            t_synth: 2.0,
            n_atoms: 20,
            dt: 5e-3,
            ..NewtonConfig::default()
        };
        match newton_control(&z0, &z1, &c, &cfg) {
            Err(Error::ObstructedState { .. }) => {}
            other => panic!("expected obstruction, got {other:?}"),
        }
    }

    #[test]
    fn steering_rejects_bad_inputs() {
        let c = box_coupling(3, 512);
        let z0 = StateCoeffs::basis(3, 0);
        let cfg = NewtonConfig::default();
        // Off-sphere start.
        let off = StateCoeffs::new(vec![
            C64::new(2.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]);
        assert!(newton_control(&off, &z0, &c, &cfg).is_err());
        // Length mismatch.
        let short = StateCoeffs::basis(2, 0);
        assert!(newton_control(&short, &z0, &c, &cfg).is_err());
        // Bad configuration.
        let bad = NewtonConfig {
            dt: 0.0,
            ..NewtonConfig::default()
        };
        assert!(newton_control(&z0, &z0, &c, &bad).is_err());
    }
}
