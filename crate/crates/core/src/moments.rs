//! Moment tables: the frequency-domain data a control must realize so the
//! linearized flow reaches a prescribed tangent target, and the least-squares
//! synthesis of a control from such a table.
//!
//! The co-rotating endpoint of the linearized flow is
//!
//!   y_m = -i sum_k c_k Q_mk u^(omega_mk),    omega_mk = lambda_m - lambda_k,
//!
//! so steering the linearization reduces to prescribing the transform of a
//! real control on the coupling's frequency table. [`target_to_moments`]
//! inverts the defining identity for the table entries, [`synthesize_control`]
//! fits a raised-cosine signal to the table, and [`obstruction_invariant`]
//! evaluates the functional that is conserved exactly on the balanced
//! two-mode states where the inversion breaks down.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::coupling::{e_set_defect, CouplingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{spd_condition_estimate, Cholesky};
use crate::propagator::Trajectory;
use crate::signal::{fourier_moment, theta_norm_over, ControlSignal, ThetaNorm};
use crate::spectral::StateCoeffs;
use crate::C64;
#[allow(unused_imports)]
use num_traits::Float as _;

/// Populations below this are treated as empty modes.
const POPULATION_FLOOR: f64 = 1e-12;

/// Sobolev order used for the size report of a synthesized control.
const REPORT_SOBOLEV_ORDER: f64 = 1.0;

/// Which closure produced a moment table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentCase {
    /// One populated mode; the zero-frequency moment is forced directly.
    SingleMode,
    /// Two or more populated modes with a nonvanishing weighted-population
    /// gap; one column of unknowns closes every populated row.
    Generic,
    /// Three or more populated modes with a vanishing gap; the closure
    /// reroutes through the second and third modes.
    Degenerate,
}

/// Prescribed transform values for a real control on a frequency table.
///
/// Entries form a Hermitian matrix whose diagonal is the real zero-frequency
/// moment `d0`; entry (m, k) is the value the control's transform must take
/// at `omega(m, k)`. Only one representative per conjugate pair is fitted.
#[derive(Clone, Debug)]
pub struct MomentTable {
    n: usize,
    d0: f64,
    entries: Vec<C64>,
    omegas: Vec<f64>,
    case: MomentCase,
}

impl MomentTable {
    /// Assemble a table directly from positive-frequency representatives
    /// (m > k), for synthesis tests and hand-built problems. Pairs not
    /// listed carry frequency zero and are skipped by the synthesis.
    pub fn from_representatives(
        n: usize,
        d0: f64,
        reps: &[(usize, usize, f64, C64)],
    ) -> Result<MomentTable> {
        if n == 0 {
            return Err(Error::Invalid("empty moment table".into()));
        }
        if !d0.is_finite() {
            return Err(Error::NonFinite("zero-frequency moment"));
        }
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        let mut omegas = vec![0.0; n * n];
        for m in 0..n {
            entries[m * n + m] = C64::new(d0, 0.0);
        }
        for &(m, k, omega, value) in reps {
            if m >= n || k >= m {
                return Err(Error::Invalid(format!(
                    "representative ({m}, {k}) is not a lower pair below {n}"
                )));
            }
            if !(omega.is_finite() && omega > 0.0) || !value.is_finite() {
                return Err(Error::Invalid(format!(
                    "bad representative at ({m}, {k})"
                )));
            }
            if omegas[m * n + k] != 0.0 {
                return Err(Error::Invalid(format!(
                    "duplicate representative ({m}, {k})"
                )));
            }
            entries[m * n + k] = value;
            entries[k * n + m] = value.conj();
            omegas[m * n + k] = omega;
            omegas[k * n + m] = -omega;
        }
        Ok(MomentTable {
            n,
            d0,
            entries,
            omegas,
            case: MomentCase::Generic,
        })
    }

    /// Number of modes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The real zero-frequency moment (shared diagonal).
    pub fn d0(&self) -> f64 {
        self.d0
    }

    /// Which closure built the table.
    pub fn case(&self) -> MomentCase {
        self.case
    }

    /// Table entry (m, k); the diagonal is `d0` and (k, m) is the conjugate.
    pub fn entry(&self, m: usize, k: usize) -> C64 {
        self.entries[m * self.n + k]
    }

    /// Frequency attached to entry (m, k).
    pub fn omega(&self, m: usize, k: usize) -> f64 {
        self.omegas[m * self.n + k]
    }

    /// Positive-frequency representatives (m, k, omega, value) with m > k,
    /// the fitted targets besides the zero-frequency one.
    pub fn representatives(
        &self,
    ) -> impl Iterator<Item = (usize, usize, f64, C64)> + '_ {
        let n = self.n;
        (1..n).flat_map(move |m| (0..m).map(move |k| (m, k))).filter_map(
            move |(m, k)| {
                let omega = self.omegas[m * n + k];
                if omega > 0.0 {
                    Some((m, k, omega, self.entries[m * n + k]))
                } else {
                    None
                }
            },
        )
    }
}

/// A complex value depending affinely on the one real free parameter of the
/// closure (the zero-frequency moment).
#[derive(Clone, Copy)]
struct Affine {
    base: C64,
    slope: C64,
}

impl Affine {
    const ZERO: Affine = Affine {
        base: C64::new(0.0, 0.0),
        slope: C64::new(0.0, 0.0),
    };

    fn at(&self, d0: f64) -> C64 {
        self.base + self.slope * d0
    }

    /// Conjugation commutes with evaluation because the parameter is real.
    fn conj(&self) -> Affine {
        Affine {
            base: self.base.conj(),
            slope: self.slope.conj(),
        }
    }
}

/// Build the moment table that makes the linearized flow reach the tangent
/// target `y` from the unit profile `ztilde`.
///
/// Requires `ztilde` normalized within 1e-8 and `y` tangent:
/// |Re <y, ztilde>| <= 1e-10 (1 + ||y||). The returned entries satisfy the
/// defining identity -i sum_k c_k Q_mk d_mk = y_m for every mode, with the
/// diagonal exactly the real scalar d0.
///
/// Errors: `ObstructedState` when exactly two modes are populated and their
/// weighted populations balance (the closure is singular there, and a
/// functional of the flow is conserved instead, see
/// [`obstruction_invariant`]); `DegenerateCoupling` when a needed division
/// by a coupling entry meets a vanishing denominator; `ClosureContradiction`
/// when no real d0 can close the leading row.
pub fn target_to_moments(
    ztilde: &StateCoeffs,
    y: &StateCoeffs,
    c: &CouplingMatrix,
) -> Result<MomentTable> {
    let n = c.n();
    if ztilde.len() != n || y.len() != n {
        return Err(Error::Invalid(format!(
            "profile/target length {} / {} does not match the {n} modes",
            ztilde.len(),
            y.len()
        )));
    }
    if !ztilde.coeffs().iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::NonFinite("profile coefficient"));
    }
    if !y.coeffs().iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::NonFinite("target coefficient"));
    }
    if (ztilde.l2_norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Invalid(format!(
            "profile norm {} is not 1",
            ztilde.l2_norm()
        )));
    }
    let ynorm = y.l2_norm();
    let tangency = ztilde.inner(y).re.abs() / ztilde.l2_norm();
    if tangency > 1e-10 * (1.0 + ynorm) {
        return Err(Error::Invalid(format!(
            "target is not tangent: Re inner = {tangency:.3e}"
        )));
    }

    // Work with the exactly normalized profile; the identity below relies on
    // sum |c_k|^2 = 1.
    let zt = ztilde.normalized()?;
    let cs = zt.coeffs();
    let ys = y.coeffs();

    let mut populated: Vec<usize> =
        (0..n).filter(|&j| cs[j].norm() > POPULATION_FLOOR).collect();
    if populated.is_empty() {
        return Err(Error::Invalid("profile has no populated mode".into()));
    }
    // Largest population first, ties to the smaller index.
    populated.sort_by(|&a, &b| {
        cs[b].norm()
            .partial_cmp(&cs[a].norm())
            .expect("finite populations")
            .then(a.cmp(&b))
    });
    let p = populated[0];

    let max_abs_q = (0..n * n).fold(0.0f64, |acc, i| {
        let (m, k) = (i / n, i % n);
        acc.max(c.q(m, k).abs())
    });
    let tiny_q = 1e-13 * (1.0 + max_abs_q);
    let tiny_num = 1e-13 * (1.0 + ynorm);

    // beta = Im <ztilde, y>; tangency makes <ztilde, y> = i beta.
    let beta = zt.inner(y).im;

    // Diagonal unknowns are d0 + g_m with g_m = 2 Im(y_m conj(c_m)) / Q_mm.
    let mut g = vec![0.0; n];
    for &m in &populated {
        let num = 2.0 * (ys[m] * cs[m].conj()).im;
        let qmm = c.q(m, m);
        if qmm.abs() <= tiny_q {
            if num.abs() <= tiny_num {
                g[m] = 0.0;
            } else {
                return Err(Error::DegenerateCoupling {
                    m,
                    k: m,
                    value: qmm,
                });
            }
        } else {
            g[m] = num / qmm;
        }
    }

    let max_diag =
        (0..n).fold(0.0f64, |acc, m| acc.max(c.q(m, m).abs()));
    let defect = e_set_defect(&zt, c, p);
    let balanced = defect.abs() <= 1e-8 * (1.0 + max_diag);
    let case = if populated.len() == 1 {
        MomentCase::SingleMode
    } else if balanced {
        if populated.len() == 2 {
            return Err(Error::ObstructedState { defect });
        }
        MomentCase::Degenerate
    } else {
        MomentCase::Generic
    };

    // Correction entries C_mk, affine in the real parameter d0. Diagonal:
    // C_mm = d0 + g_m. Every populated row m closes through
    // sum_k c_k Q_mk C_mk = -c_m beta with at most two unknowns per row.
    let mut corr = vec![Affine::ZERO; n * n];
    for m in 0..n {
        corr[m * n + m] = Affine {
            base: C64::new(g[m], 0.0),
            slope: C64::new(1.0, 0.0),
        };
    }

    // Divide an affine numerator by a complex scalar, guarding the
    // degenerate-coupling case: a vanishing denominator is only acceptable
    // when the numerator vanishes identically.
    let div = |num: Affine, den: C64, m: usize, k: usize| -> Result<Affine> {
        if den.norm() <= tiny_q * POPULATION_FLOOR.max(1e-9) {
            if num.base.norm() <= tiny_num && num.slope.norm() <= tiny_num {
                return Ok(Affine::ZERO);
            }
            return Err(Error::DegenerateCoupling {
                m,
                k,
                value: den.norm(),
            });
        }
        Ok(Affine {
            base: num.base / den,
            slope: num.slope / den,
        })
    };

    // Row closure for a mode whose only off-diagonal unknown sits in the
    // leading column: c_col Q_{m,col} C_{m,col} + c_m Q_mm C_mm = -c_m beta.
    let lead_entry = |m: usize, col: usize| -> Result<Affine> {
        let cm = cs[m];
        let qmm = c.q(m, m);
        let num = Affine {
            base: -cm * (beta + qmm * g[m]),
            slope: -cm * qmm,
        };
        div(num, cs[col] * c.q(m, col), m, col)
    };

    match case {
        MomentCase::SingleMode => {}
        MomentCase::Generic => {
            for &m in &populated[1..] {
                let e = lead_entry(m, p)?;
                corr[m * n + p] = e;
                corr[p * n + m] = e.conj();
            }
        }
        MomentCase::Degenerate => {
            let q = populated[1];
            let r = populated[2];
            // The (q, p) entry is pinned to zero; row q then closes through
            // (q, r), row r through (r, p), and every other populated row
            // through its leading-column entry as in the generic case.
            let num_q = Affine {
                base: -cs[q] * (beta + c.q(q, q) * g[q]),
                slope: -cs[q] * c.q(q, q),
            };
            let cqr = div(num_q, cs[r] * c.q(q, r), q, r)?;
            corr[q * n + r] = cqr;
            corr[r * n + q] = cqr.conj();

            let crq = cqr.conj();
            let num_r = Affine {
                base: -cs[r] * (beta + c.q(r, r) * g[r])
                    - cs[q] * c.q(r, q) * crq.base,
                slope: -cs[r] * c.q(r, r) - cs[q] * c.q(r, q) * crq.slope,
            };
            let crp = div(num_r, cs[p] * c.q(r, p), r, p)?;
            corr[r * n + p] = crp;
            corr[p * n + r] = crp.conj();

            for &m in &populated[3..] {
                let e = lead_entry(m, p)?;
                corr[m * n + p] = e;
                corr[p * n + m] = e.conj();
            }
        }
    }

    // The leading row fixes d0 by real least squares on
    // alpha + gamma d0 = sum_k c_k Q_pk C_pk + c_p beta.
    let mut alpha = cs[p] * beta;
    let mut gamma = C64::new(0.0, 0.0);
    for &k in &populated {
        let af = corr[p * n + k];
        let w = cs[k] * c.q(p, k);
        alpha += w * af.base;
        gamma += w * af.slope;
    }
    let d0 = if gamma.norm() > 1e-12 * (1.0 + max_abs_q) {
        -(alpha.re * gamma.re + alpha.im * gamma.im) / gamma.norm_sqr()
    } else if alpha.norm() <= 1e-9 * (1.0 + ynorm) * (1.0 + max_abs_q) {
        0.0
    } else {
        return Err(Error::ClosureContradiction);
    };

    // Assemble the Hermitian table: d_mk = fraction term + C_mk off the
    // diagonal, exactly d0 on it.
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    let mut omegas = vec![0.0; n * n];
    for m in 0..n {
        entries[m * n + m] = C64::new(d0, 0.0);
        for k in 0..m {
            let qmk = c.q(m, k);
            let num = C64::i() * (ys[m] * cs[k].conj())
                - C64::i() * (ys[k].conj() * cs[m]);
            let frac = if qmk.abs() <= tiny_q {
                if num.norm() <= tiny_num {
                    C64::new(0.0, 0.0)
                } else {
                    return Err(Error::DegenerateCoupling {
                        m,
                        k,
                        value: qmk,
                    });
                }
            } else {
                num / qmk
            };
            let value = frac + corr[m * n + k].at(d0);
            entries[m * n + k] = value;
            entries[k * n + m] = value.conj();
            omegas[m * n + k] = c.omega(m, k);
            omegas[k * n + m] = c.omega(k, m);
        }
    }

    // Self-check: the defining identity must close on every mode.
    let mut residual_sq = 0.0;
    for m in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for (k, ck) in cs.iter().enumerate() {
            acc += ck * c.q(m, k) * entries[m * n + k];
        }
        residual_sq += (C64::new(0.0, -1.0) * acc - ys[m]).norm_sqr();
    }
    let residual = residual_sq.sqrt();
    if residual > 1e-10 * (1.0 + ynorm) + 2.0 * tangency {
        return Err(Error::Invalid(format!(
            "moment closure residual {residual:.3e} exceeds tolerance"
        )));
    }

    Ok(MomentTable {
        n,
        d0,
        entries,
        omegas,
        case,
    })
}

/// Outcome of fitting a control to a moment table.
#[derive(Clone, Debug)]
pub struct SynthesisReport {
    /// Fitted moments: the zero-frequency one plus one per representative.
    pub n_targets: usize,
    /// Condition estimate of the regularized Gram matrix.
    pub condition: f64,
    /// Moment mismatch per target, measured by independent quadrature;
    /// entry 0 is the zero-frequency moment, the rest follow the
    /// representative order of the table.
    pub residuals: Vec<f64>,
    /// Largest entry of `residuals`.
    pub max_residual: f64,
    /// Euclidean norm of `residuals`.
    pub l2_residual: f64,
    /// Layered size of the synthesized control (Sobolev order 1).
    pub theta: ThetaNorm,
}

/// Fit a raised-cosine signal on [0, t_horizon] whose transform takes the
/// table's values, by Tikhonov-regularized least squares on the atom weights:
/// minimize sum_l |u^(omega_l) - d_l|^2 + rho |w|^2.
///
/// Residuals are re-measured by quadrature, independent of the closed-form
/// transform used to build the system. Errors: `IllConditioned` when the
/// regularized Gram matrix has an estimated condition number above 1e12 or
/// fails to factor.
pub fn synthesize_control(
    table: &MomentTable,
    t_horizon: f64,
    n_atoms: usize,
    rho: f64,
) -> Result<(ControlSignal, SynthesisReport)> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::Invalid(format!("bad regularization {rho}")));
    }
    let u0 = ControlSignal::new(t_horizon, n_atoms)?;
    let delta = u0.delta();

    // Targets: the real zero-frequency row, then a conjugate-pair
    // representative each contributing its real and imaginary row.
    let reps: Vec<(usize, usize, f64, C64)> = table.representatives().collect();
    let n_targets = 1 + reps.len();

    // Normal equations accumulated row by row; the transform of atom a is
    // the base atom's transform rotated by e^{i omega a delta}.
    let mut gram = vec![0.0; n_atoms * n_atoms];
    let mut rhs = vec![0.0; n_atoms];
    let mut row_re = vec![0.0; n_atoms];
    let mut row_im = vec![0.0; n_atoms];
    let accumulate = |row: &[f64], target: f64,
                      gram: &mut [f64], rhs: &mut [f64]| {
        for i in 0..n_atoms {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            rhs[i] += ri * target;
            for j in 0..n_atoms {
                gram[i * n_atoms + j] += ri * row[j];
            }
        }
    };
    let mut add_target = |omega: f64, d: C64,
                          gram: &mut [f64], rhs: &mut [f64]| {
        let base = u0.atom_transform(omega);
        let rot = C64::from_polar(1.0, omega * delta);
        let mut t = base;
        for a in 0..n_atoms {
            row_re[a] = t.re;
            row_im[a] = t.im;
            t *= rot;
        }
        accumulate(&row_re, d.re, gram, rhs);
        if omega > 0.0 {
            accumulate(&row_im, d.im, gram, rhs);
        }
    };
    add_target(0.0, C64::new(table.d0(), 0.0), &mut gram, &mut rhs);
    for &(_, _, omega, d) in &reps {
        add_target(omega, d, &mut gram, &mut rhs);
    }
    for i in 0..n_atoms {
        gram[i * n_atoms + i] += rho;
    }

    let chol = Cholesky::new(&gram, n_atoms).ok_or(Error::IllConditioned {
        cond: f64::INFINITY,
    })?;
    let condition = spd_condition_estimate(&gram, n_atoms, &chol);
    if condition > 1e12 {
        return Err(Error::IllConditioned { cond: condition });
    }
    let mut weights = chol.solve(&rhs);
    // Two rounds of iterative refinement push the solve error of the normal
    // equations to the rounding floor of the residual computation.
    for _ in 0..2 {
        let mut r = rhs.clone();
        for i in 0..n_atoms {
            let mut s = 0.0;
            for j in 0..n_atoms {
                s += gram[i * n_atoms + j] * weights[j];
            }
            r[i] -= s;
        }
        let dw = chol.solve(&r);
        for (w, d) in weights.iter_mut().zip(&dw) {
            *w += d;
        }
    }

    let u = ControlSignal::with_weights(t_horizon, weights)?;

    let mut residuals = Vec::with_capacity(n_targets);
    residuals.push((fourier_moment(&u, 0.0).re - table.d0()).abs());
    let mut rep_omegas = Vec::with_capacity(reps.len());
    for &(_, _, omega, d) in &reps {
        residuals.push((fourier_moment(&u, omega) - d).norm());
        rep_omegas.push(omega);
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    let l2_residual =
        residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
    let theta = theta_norm_over(&u, &rep_omegas, REPORT_SOBOLEV_ORDER)?;

    Ok((
        u,
        SynthesisReport {
            n_targets,
            condition,
            residuals,
            max_residual,
            l2_residual,
            theta,
        },
    ))
}

/// Co-rotating endpoint of the linearized flow under `u`, evaluated in
/// closed form from the signal's transform:
///
///   y_m = -i sum_k c_k Q_mk u^(omega_mk).
///
/// Matches the endpoint of a trapezoid integration of the first variation as
/// the step shrinks, and is tangent to the profile whenever it is normalized.
pub fn linearized_endpoint(
    ztilde: &StateCoeffs,
    u: &ControlSignal,
    c: &CouplingMatrix,
) -> StateCoeffs {
    let n = c.n();
    assert_eq!(ztilde.len(), n, "profile does not match the coupling");
    let mut coeffs = vec![C64::new(0.0, 0.0); n];
    for (m, out) in coeffs.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (k, ck) in ztilde.coeffs().iter().enumerate() {
            if ck.norm_sqr() == 0.0 {
                continue;
            }
            acc += ck * c.q(m, k) * u.transform(c.omega(m, k));
        }
        *out = C64::new(0.0, -1.0) * acc;
    }
    StateCoeffs::new(coeffs)
}

/// The balanced two-mode functional along a linearized trajectory:
///
///   J(t) = Im(conj(c_p) e^{i lambda_p t} R_p(t))
///        - Im(conj(c_q) e^{i lambda_q t} R_q(t)).
///
/// For profiles populated exactly on modes p and q, dJ/dt equals minus the
/// control times the weighted-population gap, so J is constant whenever the
/// gap vanishes; on such states no tangent target with a nonzero J budget is
/// reachable. Errors when the profile is not a two-mode state on {p, q}.
pub fn obstruction_invariant(
    traj: &Trajectory,
    ztilde: &StateCoeffs,
    p: usize,
    q: usize,
) -> Result<Vec<f64>> {
    let n = ztilde.len();
    if traj.lambdas().len() != n {
        return Err(Error::Invalid(format!(
            "trajectory carries {} modes, profile {n}",
            traj.lambdas().len()
        )));
    }
    if p >= n || q >= n || p == q {
        return Err(Error::Invalid(format!("bad mode pair ({p}, {q})")));
    }
    let cs = ztilde.coeffs();
    if cs[p].norm() <= 1e-9 || cs[q].norm() <= 1e-9 {
        return Err(Error::Invalid(format!(
            "modes {p} and {q} are not both populated"
        )));
    }
    for (j, cj) in cs.iter().enumerate() {
        if j != p && j != q && cj.norm() > 1e-9 {
            return Err(Error::Invalid(format!(
                "profile is not a two-mode state: mode {j} is populated"
            )));
        }
    }
    let lp = traj.lambdas()[p];
    let lq = traj.lambdas()[q];
    let series = traj
        .times()
        .iter()
        .zip(traj.states())
        .map(|(&t, state)| {
            let rp = state.coeffs()[p];
            let rq = state.coeffs()[q];
            (cs[p].conj() * C64::from_polar(1.0, lp * t) * rp).im
                - (cs[q].conj() * C64::from_polar(1.0, lq * t) * rq).im
        })
        .collect();
    Ok(series)
}
