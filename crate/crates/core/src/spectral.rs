//! Dirichlet spectral data for -d2/dx2 + V on the unit interval.
//!
//! Eigenpairs come from second-order central finite differences on a uniform
//! grid, solved as a symmetric tridiagonal eigenproblem. Eigenvalues carry a
//! dispersion correction that removes the k-dependent bias of the discrete
//! Laplacian, so lambda_k tracks k^2 pi^2 + O(h^2) uniformly in k instead of
//! degrading like (k h)^2. All inner products are trapezoidal on the grid.
//!
//! Conventions fixed here and used across the crate:
//! - mode sign gauge: e_k'(0) > 0 (first interior sample positive);
//! - `lambdas()` are gauge-shifted so lambda_1 >= 1 (shift recorded), which
//!   keeps lambda^s well defined for every s; `physical_lambdas()` undoes it;
//! - complex pairing `<a, b> = sum_j a_j conj(b_j)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;
#[allow(unused_imports)]
use num_traits::Float as _;

/// Real potential sampled on a uniform grid over [0,1], endpoints included.
/// Evaluation between samples is linear interpolation.
#[derive(Clone, Debug)]
pub struct Potential {
    values: Vec<f64>,
}

impl Potential {
    /// Minimum number of samples a potential must carry.
    pub const MIN_POINTS: usize = 16;

    /// The zero potential.
    pub fn zero(n_points: usize) -> Self {
        Self::constant(n_points, 0.0)
    }

    /// A constant potential.
    pub fn constant(n_points: usize, c: f64) -> Self {
        assert!(n_points >= Self::MIN_POINTS, "need at least 16 samples");
        assert!(c.is_finite());
        Potential { values: vec![c; n_points] }
    }

    /// Sample `f` at `n_points` equispaced points of [0,1].
    pub fn from_fn(n_points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_points < Self::MIN_POINTS {
            return Err(Error::Invalid(format!(
                "potential needs at least {} samples, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        let dx = 1.0 / (n_points as f64 - 1.0);
        let values: Vec<f64> = (0..n_points).map(|i| f(i as f64 * dx)).collect();
        Self::from_samples(values)
    }

    /// Wrap explicit samples (equispaced over [0,1], endpoints included).
    pub fn from_samples(values: Vec<f64>) -> Result<Self> {
        if values.len() < Self::MIN_POINTS {
            return Err(Error::Invalid(format!(
                "potential needs at least {} samples, got {}",
                Self::MIN_POINTS,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("potential sample"));
        }
        Ok(Potential { values })
    }

    /// Number of stored samples.
    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    /// Stored samples.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `x` (clamped to [0,1]) by linear interpolation.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = x.clamp(0.0, 1.0) * (n as f64 - 1.0);
        let i = (t.floor() as usize).min(n - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Trapezoidal integral over [0,1] of the stored samples.
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        let dx = 1.0 / (n as f64 - 1.0);
        let mut s = 0.5 * (self.values[0] + self.values[n - 1]);
        for v in &self.values[1..n - 1] {
            s += v;
        }
        s * dx
    }
}

/// Dirichlet eigenpairs of -d2/dx2 + V on (0,1).
///
/// Modes are stored at the interior grid points x_i = i h, i = 1..n_grid-1
/// (the boundary values are identically zero), L2-normalized under the
/// trapezoidal rule, with the sign gauge e_k'(0) > 0.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    n_grid: usize,
    lambdas: Vec<f64>,
    gauge_shift: f64,
    modes: Vec<Vec<f64>>,
}

impl EigenSystem {
    /// Number of eigenpairs held.
    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    /// Number of grid cells; the grid step is 1 / n_grid.
    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    /// Grid step.
    pub fn h(&self) -> f64 {
        1.0 / self.n_grid as f64
    }

    /// Gauge-shifted eigenvalues, ascending, with lambdas()[0] >= 1.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// The constant added to every eigenvalue to force lambda_1 >= 1.
    pub fn gauge_shift(&self) -> f64 {
        self.gauge_shift
    }

    /// Eigenvalues of the original operator (shift removed).
    pub fn physical_lambdas(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l - self.gauge_shift).collect()
    }

    /// Interior samples of mode `k` (0-based; `mode(0)` is the ground state).
    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }

    /// Mode value at arbitrary `x` by linear interpolation, with the
    /// Dirichlet zeros at the endpoints.
    pub fn mode_value(&self, k: usize, x: f64) -> f64 {
        let n = self.n_grid;
        let t = x.clamp(0.0, 1.0) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        let left = if i == 0 { 0.0 } else { self.modes[k][i - 1] };
        let right = if i + 1 > n - 1 { 0.0 } else { self.modes[k][i] };
        left * (1.0 - frac) + right * frac
    }

    /// Trapezoidal L2 pairing of two stored modes.
    pub fn mode_inner(&self, i: usize, j: usize) -> f64 {
        let h = self.h();
        self.modes[i]
            .iter()
            .zip(&self.modes[j])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * h
    }
}

/// Lowest `n_modes` Dirichlet eigenpairs of -d2/dx2 + V on a uniform grid
/// with `n_grid` cells.
///
/// The finite-difference eigenvalues are corrected by the exact dispersion
/// defect of the discrete Laplacian, k^2 pi^2 - (2/h^2)(1 - cos(k pi h)),
/// which makes the V = 0 spectrum exact and leaves an O(h^2) error that is
/// uniform in k otherwise. A constant gauge shift is added so the smallest
/// reported eigenvalue is at least 1.
///
/// # Example
/// ```
/// use qsteer_core::{solve_sturm_liouville, Potential};
/// let sys = solve_sturm_liouville(&Potential::zero(65), 2, 64).unwrap();
/// let pi2 = core::f64::consts::PI.powi(2);
/// assert!((sys.lambdas()[0] - pi2).abs() < 1e-9);
/// assert!((sys.lambdas()[1] - 4.0 * pi2).abs() < 1e-9);
/// ```
pub fn solve_sturm_liouville(
    v: &Potential,
    n_modes: usize,
    n_grid: usize,
) -> Result<EigenSystem> {
    if n_modes == 0 {
        return Err(Error::Invalid("n_modes must be at least 1".into()));
    }
    if n_grid < 8 * n_modes {
        return Err(Error::ResolutionGuard { n_grid, n_modes });
    }
    let h = 1.0 / n_grid as f64;
    let n = n_grid - 1;
    let mut diag = Vec::with_capacity(n);
    for i in 1..n_grid {
        let vi = v.eval(i as f64 * h);
        if !vi.is_finite() {
            return Err(Error::NonFinite("potential value"));
        }
        diag.push(2.0 / (h * h) + vi);
    }
    let off = vec![-1.0 / (h * h); n - 1];

    let raw = linalg::tridiag_lowest_eigenvalues(&diag, &off, n_modes);
    let mut lambdas = Vec::with_capacity(n_modes);
    for (idx, &lam_fd) in raw.iter().enumerate() {
        let k = (idx + 1) as f64;
        let discrete = 2.0 / (h * h) * (1.0 - (k * PI * h).cos());
        lambdas.push(lam_fd + (k * k * PI * PI - discrete));
    }

    let mut modes = Vec::with_capacity(n_modes);
    for &lam_fd in &raw {
        let mut vec = linalg::tridiag_eigenvector(&diag, &off, lam_fd);
        // Sign gauge: positive slope at the left wall.
        if vec[0] < 0.0 {
            for x in vec.iter_mut() {
                *x = -*x;
            }
        }
        // Unit 2-norm to unit trapezoidal L2 norm (boundary samples are 0).
        let scale = 1.0 / h.sqrt();
        for x in vec.iter_mut() {
            *x *= scale;
        }
        modes.push(vec);
    }

    let gauge_shift = if lambdas[0] < 1.0 { 1.0 - lambdas[0] } else { 0.0 };
    for l in lambdas.iter_mut() {
        *l += gauge_shift;
    }
    debug_assert!(lambdas.windows(2).all(|w| w[0] < w[1]));

    Ok(EigenSystem { n_grid, lambdas, gauge_shift, modes })
}

/// Tensor-product spectral data for a separable potential on (0,1)^d.
///
/// Eigenvalues are exact sums of factor eigenvalues; modes are products of
/// factor modes. Entries are sorted by eigenvalue; `labels()` keeps the
/// 1-based factor mode indices of each entry.
#[derive(Clone, Debug)]
pub struct EigenSystemNd {
    factors: Vec<EigenSystem>,
    lambdas: Vec<f64>,
    gauge_shift: f64,
    labels: Vec<Vec<usize>>,
}

impl EigenSystemNd {
    /// Spatial dimension d.
    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    /// Number of multi-index modes (product of factor mode counts).
    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    /// Factor systems.
    pub fn factors(&self) -> &[EigenSystem] {
        &self.factors
    }

    /// Gauge-shifted eigenvalues, ascending (shift = sum of factor shifts).
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Total gauge shift.
    pub fn gauge_shift(&self) -> f64 {
        self.gauge_shift
    }

    /// Eigenvalues of the original operator.
    pub fn physical_lambdas(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l - self.gauge_shift).collect()
    }

    /// 1-based factor mode indices (j_1, ..., j_d) per entry, in the same
    /// order as `lambdas()`.
    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    /// Mode value at a point of the box: the product of factor mode values.
    pub fn mode_value(&self, entry: usize, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim());
        self.labels[entry]
            .iter()
            .zip(x)
            .enumerate()
            .map(|(axis, (&j, &xi))| self.factors[axis].mode_value(j - 1, xi))
            .product()
    }
}

/// Combine 1-D eigensystems into the spectrum of the separable operator
/// -Laplacian + V_1(x_1) + ... + V_d(x_d) on the box (0,1)^d.
pub fn tensor_eigensystem(systems: &[EigenSystem]) -> Result<EigenSystemNd> {
    if systems.is_empty() {
        return Err(Error::Invalid("tensor product needs at least one factor".into()));
    }
    let n_grid = systems[0].n_grid();
    if systems.iter().any(|s| s.n_grid() != n_grid) {
        return Err(Error::Invalid("tensor factors must share grid resolution".into()));
    }
    let gauge_shift: f64 = systems.iter().map(|s| s.gauge_shift()).sum();
    let mut lambdas = Vec::new();
    let mut labels: Vec<Vec<usize>> = Vec::new();
    // Odometer over the multi-index set.
    let counts: Vec<usize> = systems.iter().map(|s| s.n_modes()).collect();
    let total: usize = counts.iter().product();
    let mut idx = vec![0usize; systems.len()];
    for _ in 0..total {
        let lam: f64 = idx.iter().zip(systems).map(|(&j, s)| s.lambdas()[j]).sum();
        lambdas.push(lam);
        labels.push(idx.iter().map(|&j| j + 1).collect());
        for axis in (0..idx.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < counts[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
    let lambdas: Vec<f64> = order.iter().map(|&i| lambdas[i]).collect();
    let labels: Vec<Vec<usize>> = order.iter().map(|&i| labels[i].clone()).collect();
    Ok(EigenSystemNd { factors: systems.to_vec(), lambdas, gauge_shift, labels })
}

/// Complex coefficients of a state in a fixed eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateCoeffs {
    coeffs: Vec<C64>,
}

impl StateCoeffs {
    /// Wrap a coefficient vector.
    pub fn new(coeffs: Vec<C64>) -> Self {
        StateCoeffs { coeffs }
    }

    /// The zero state on `n` modes.
    pub fn zeros(n: usize) -> Self {
        StateCoeffs { coeffs: vec![C64::new(0.0, 0.0); n] }
    }

    /// The basis state on mode `k` (0-based) out of `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        assert!(k < n, "basis index out of range");
        let mut coeffs = vec![C64::new(0.0, 0.0); n];
        coeffs[k] = C64::new(1.0, 0.0);
        StateCoeffs { coeffs }
    }

    /// Number of modes.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    /// True when the state has no modes.
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient slice.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Mutable coefficient slice.
    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// Pairing `<self, other> = sum_j a_j conj(b_j)`.
    pub fn inner(&self, other: &StateCoeffs) -> C64 {
        assert_eq!(self.len(), other.len());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    /// The l2 norm of the coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// The state rescaled to the unit sphere.
    pub fn normalized(&self) -> Result<StateCoeffs> {
        let norm = self.l2_norm();
        if norm < 1e-300 {
            return Err(Error::Invalid("cannot normalize the zero state".into()));
        }
        Ok(StateCoeffs {
            coeffs: self.coeffs.iter().map(|c| c / norm).collect(),
        })
    }
}

/// Weighted Sobolev-scale norm (sum_j lambda_j^s |c_j|^2)^(1/2).
///
/// `lambdas` must be the gauge-shifted eigenvalues (all >= 1), which makes
/// the norm monotone in `s`. Panics on negative `s` or length mismatch.
pub fn hs_norm(z: &StateCoeffs, lambdas: &[f64], s: f64) -> f64 {
    assert!(s >= 0.0, "hs_norm needs s >= 0");
    assert_eq!(z.len(), lambdas.len(), "state and spectrum length mismatch");
    z.coeffs()
        .iter()
        .zip(lambdas)
        .map(|(c, l)| l.powf(s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Index-weighted norm (sum |(j_1^3 ... j_d^3) c|^2)^(1/2) over multi-index
/// labels. For d = 1 this tracks `hs_norm(z, lambdas, 3)` only up to the
/// lambda_j vs (j pi)^2 asymptotic ratio; the two are distinct norms.
pub fn v_norm(z: &StateCoeffs, labels: &[Vec<usize>]) -> f64 {
    assert_eq!(z.len(), labels.len(), "state and label length mismatch");
    z.coeffs()
        .iter()
        .zip(labels)
        .map(|(c, label)| {
            let w: f64 = label.iter().map(|&j| (j * j * j) as f64).product();
            (w * w) * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Comparison of a computed spectrum against the flat-spectrum reference
/// k^2 pi^2 + integral(V).
#[derive(Clone, Debug)]
pub struct AsymptoticsReport {
    /// Remainders r_k = lambda_k - k^2 pi^2 - integral(V) (physical gauge).
    pub remainders: Vec<f64>,
    /// Partial sums of r_k^2.
    pub remainder_sq_partial: Vec<f64>,
    /// Fraction of the final r^2 sum contributed by the last quarter of
    /// modes; small values mean the sum has plateaued.
    pub last_quarter_fraction: f64,
    /// sup_x |e_k - sqrt(2) sin(k pi x)| per mode.
    pub sup_mode_err: Vec<f64>,
    /// sup_x |e_k' - sqrt(2) k pi cos(k pi x)| per mode (central differences).
    pub sup_deriv_err: Vec<f64>,
    /// k * sup_mode_err, the quantity whose growth is flagged.
    pub k_weighted_err: Vec<f64>,
    /// True when the isotonic fit of k_weighted_err rises materially, i.e.
    /// the mode distances decay slower than 1/k.
    pub growth_flag: bool,
}

/// Best non-decreasing least-squares fit (pool adjacent violators).
fn isotonic_fit(ys: &[f64]) -> Vec<f64> {
    let mut vals: Vec<f64> = Vec::with_capacity(ys.len());
    let mut weights: Vec<usize> = Vec::with_capacity(ys.len());
    for &y in ys {
        vals.push(y);
        weights.push(1);
        while vals.len() >= 2 && vals[vals.len() - 2] > vals[vals.len() - 1] {
            let v1 = vals.pop().unwrap();
            let w1 = weights.pop().unwrap();
            let v0 = vals.pop().unwrap();
            let w0 = weights.pop().unwrap();
            let w = w0 + w1;
            vals.push((v0 * w0 as f64 + v1 * w1 as f64) / w as f64);
            weights.push(w);
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (v, w) in vals.iter().zip(&weights) {
        for _ in 0..*w {
            out.push(*v);
        }
    }
    out
}

/// True when the isotonic fit of `ys` still rises materially over the upper
/// half of the index range: by more than half the fit's median and more than
/// an absolute floor of 0.02. The lower half is excluded so a low-index
/// transient that settles onto a plateau does not read as a trend.
fn growing_tail(ys: &[f64]) -> bool {
    let fit = isotonic_fit(ys);
    let rise = fit[fit.len() - 1] - fit[fit.len() / 2];
    let mut sorted = fit.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    rise > (0.5 * median).max(0.02)
}

/// Compare the computed spectrum and modes of `sys` against the
/// flat-spectrum reference: eigenvalue remainders after removing
/// k^2 pi^2 + integral(V), and sup distances of modes and derivatives
/// from the V = 0 eigenfunctions.
///
/// The growth flag fires when the isotonic (non-decreasing) fit of
/// k * sup_mode_err still rises over the upper half of the mode range by
/// more than half its median and by more than an absolute floor of 0.02,
/// i.e. when mode distances visibly decay slower than 1/k in the settled
/// regime. Requires at least 8 modes.
pub fn check_asymptotics(sys: &EigenSystem, v: &Potential) -> AsymptoticsReport {
    let n_modes = sys.n_modes();
    assert!(n_modes >= 8, "asymptotics need at least 8 modes");
    let h = sys.h();
    let n_grid = sys.n_grid();

    // Integral of V on the solver grid.
    let mut v_int = 0.5 * (v.eval(0.0) + v.eval(1.0));
    for i in 1..n_grid {
        v_int += v.eval(i as f64 * h);
    }
    v_int *= h;

    let physical = sys.physical_lambdas();
    let mut remainders = Vec::with_capacity(n_modes);
    let mut remainder_sq_partial = Vec::with_capacity(n_modes);
    let mut acc = 0.0;
    for (idx, &lam) in physical.iter().enumerate() {
        let k = (idx + 1) as f64;
        let r = lam - k * k * PI * PI - v_int;
        remainders.push(r);
        acc += r * r;
        remainder_sq_partial.push(acc);
    }
    let total = remainder_sq_partial[n_modes - 1];
    let at_three_quarters = remainder_sq_partial[(3 * n_modes) / 4 - 1];
    let last_quarter_fraction =
        if total > 0.0 { (total - at_three_quarters) / total } else { 0.0 };

    let sqrt2 = 2.0f64.sqrt();
    let mut sup_mode_err = Vec::with_capacity(n_modes);
    let mut sup_deriv_err = Vec::with_capacity(n_modes);
    let mut k_weighted_err = Vec::with_capacity(n_modes);
    for idx in 0..n_modes {
        let k = (idx + 1) as f64;
        let mode = sys.mode(idx);
        let mut sup = 0.0f64;
        for (i, &e) in mode.iter().enumerate() {
            let x = (i + 1) as f64 * h;
            sup = sup.max((e - sqrt2 * (k * PI * x).sin()).abs());
        }
        // Central differences on the padded samples (zero walls).
        let at = |i: isize| -> f64 {
            if i <= 0 || i as usize >= n_grid {
                0.0
            } else {
                mode[i as usize - 1]
            }
        };
        let mut sup_d = 0.0f64;
        for i in 1..n_grid as isize {
            let x = i as f64 * h;
            let d = (at(i + 1) - at(i - 1)) / (2.0 * h);
            sup_d = sup_d.max((d - sqrt2 * k * PI * (k * PI * x).cos()).abs());
        }
        sup_mode_err.push(sup);
        sup_deriv_err.push(sup_d);
        k_weighted_err.push(k * sup);
    }

    let growth_flag = growing_tail(&k_weighted_err);

    AsymptoticsReport {
        remainders,
        remainder_sq_partial,
        last_quarter_fraction,
        sup_mode_err,
        sup_deriv_err,
        k_weighted_err,
        growth_flag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_potential_spectrum_is_exact() {
        let sys = solve_sturm_liouville(&Potential::zero(2049), 16, 2048).unwrap();
        assert_eq!(sys.gauge_shift(), 0.0);
        let sqrt2 = 2.0f64.sqrt();
        for k in 1..=16usize {
            let lam = sys.lambdas()[k - 1];
            let exact = (k * k) as f64 * PI * PI;
            assert!(
                (lam - exact).abs() <= 1e-6,
                "mode {k}: lambda {lam} vs {exact}"
            );
            let mode = sys.mode(k - 1);
            let h = sys.h();
            let mut sup = 0.0f64;
            for (i, &e) in mode.iter().enumerate() {
                let x = (i + 1) as f64 * h;
                sup = sup.max((e - sqrt2 * (k as f64 * PI * x).sin()).abs());
            }
            assert!(sup <= 1e-6, "mode {k}: sup err {sup}");
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let base = solve_sturm_liouville(&Potential::zero(2049), 6, 2048).unwrap();
        let shifted =
            solve_sturm_liouville(&Potential::constant(2049, 5.0), 6, 2048).unwrap();
        for k in 0..6 {
            assert_abs_diff_eq!(
                shifted.lambdas()[k],
                base.lambdas()[k] + 5.0,
                epsilon = 1e-8
            );
            // Identical eigenfunctions.
            let max_diff = base
                .mode(k)
                .iter()
                .zip(shifted.mode(k))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_diff <= 1e-8);
        }
    }

    #[test]
    fn modes_are_orthonormal() {
        let v = Potential::from_fn(2049, |x| 10.0 * x).unwrap();
        let sys = solve_sturm_liouville(&v, 8, 2048).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(sys.mode_inner(i, j), expect, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn sign_gauge_fixes_left_slope() {
        let v = Potential::from_fn(1025, |x| (3.0 * PI * x).sin()).unwrap();
        let sys = solve_sturm_liouville(&v, 8, 1024).unwrap();
        for k in 0..8 {
            assert!(sys.mode(k)[0] > 0.0, "mode {k} left slope");
        }
    }

    #[test]
    fn grid_refinement_agrees_on_linear_potential() {
        let v = Potential::from_fn(4097, |x| 10.0 * x).unwrap();
        let coarse = solve_sturm_liouville(&v, 10, 2048).unwrap();
        let fine = solve_sturm_liouville(&v, 10, 8192).unwrap();
        for k in 0..10 {
            let d = (coarse.lambdas()[k] - fine.lambdas()[k]).abs();
            assert!(d <= 1e-5, "mode {}: refinement gap {d}", k + 1);
        }
    }

    #[test]
    fn gauge_shift_restores_physical_values() {
        let sys =
            solve_sturm_liouville(&Potential::constant(2049, -20.0), 4, 2048).unwrap();
        assert!(sys.gauge_shift() > 0.0);
        assert!(sys.lambdas()[0] >= 1.0);
        let phys = sys.physical_lambdas();
        assert_abs_diff_eq!(phys[0], PI * PI - 20.0, epsilon = 1e-6);
        assert_abs_diff_eq!(phys[3], 16.0 * PI * PI - 20.0, epsilon = 1e-6);
    }

    #[test]
    fn resolution_guard_rejects_coarse_grids() {
        let err = solve_sturm_liouville(&Potential::zero(64), 16, 64).unwrap_err();
        assert!(matches!(err, Error::ResolutionGuard { .. }));
    }

    #[test]
    fn non_finite_potential_rejected() {
        assert!(matches!(
            Potential::from_samples(vec![f64::NAN; 32]),
            Err(Error::NonFinite(_))
        ));
        assert!(Potential::from_samples(vec![0.0; 8]).is_err());
    }

    #[test]
    fn potential_eval_interpolates_linearly() {
        let v = Potential::from_fn(17, |x| 3.0 * x - 1.0).unwrap();
        for &x in &[0.0, 0.123, 0.5, 0.77, 1.0] {
            assert_abs_diff_eq!(v.eval(x), 3.0 * x - 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(v.integral(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tensor_spectrum_sums_factors() {
        let a = solve_sturm_liouville(&Potential::zero(257), 3, 256).unwrap();
        let b = a.clone();
        let nd = tensor_eigensystem(&[a.clone(), b]).unwrap();
        assert_eq!(nd.n_modes(), 9);
        // Ground multi-index (1,1) has the smallest sum.
        assert_eq!(nd.labels()[0], vec![1, 1]);
        assert_abs_diff_eq!(nd.lambdas()[0], 2.0 * PI * PI, epsilon = 1e-7);
        // Additivity is exact in floating point.
        assert_eq!(nd.lambdas()[0], a.lambdas()[0] + a.lambdas()[0]);
        // e_{1,1}(0.5, 0.5) = sqrt(2) * sqrt(2) = 2.
        assert_abs_diff_eq!(nd.mode_value(0, &[0.5, 0.5]), 2.0, epsilon = 1e-5);
    }

    #[test]
    fn tensor_three_factors_of_linear_potential() {
        let v = Potential::from_fn(257, |x| x).unwrap();
        let s = solve_sturm_liouville(&v, 2, 256).unwrap();
        let nd = tensor_eigensystem(&[s.clone(), s.clone(), s.clone()]).unwrap();
        assert_eq!(nd.labels()[0], vec![1, 1, 1]);
        assert_eq!(nd.lambdas()[0], 3.0 * s.lambdas()[0]);
    }

    #[test]
    fn tensor_rejects_empty_and_mismatched() {
        assert!(tensor_eigensystem(&[]).is_err());
        let a = solve_sturm_liouville(&Potential::zero(257), 2, 256).unwrap();
        let b = solve_sturm_liouville(&Potential::zero(129), 2, 128).unwrap();
        assert!(tensor_eigensystem(&[a, b]).is_err());
    }

    #[test]
    fn hs_norm_closed_forms() {
        let sys = solve_sturm_liouville(&Potential::zero(513), 4, 512).unwrap();
        let e1 = StateCoeffs::basis(4, 0);
        // s = 0 is the plain l2 norm.
        assert_abs_diff_eq!(hs_norm(&e1, sys.lambdas(), 0.0), 1.0, epsilon = 1e-14);
        // s = 3 on the ground state: lambda_1^(3/2) = pi^3.
        assert_abs_diff_eq!(
            hs_norm(&e1, sys.lambdas(), 3.0),
            PI.powi(3),
            epsilon = 1e-6
        );
    }

    #[test]
    fn hs_norm_monotone_in_s() {
        let sys = solve_sturm_liouville(&Potential::zero(513), 5, 512).unwrap();
        let z = StateCoeffs::new(vec![
            C64::new(0.3, 0.1),
            C64::new(0.0, -0.4),
            C64::new(0.2, 0.0),
            C64::new(-0.1, 0.1),
            C64::new(0.05, -0.02),
        ]);
        let mut prev = hs_norm(&z, sys.lambdas(), 0.0);
        for i in 1..=10 {
            let s = 0.35 * i as f64;
            let cur = hs_norm(&z, sys.lambdas(), s);
            assert!(cur >= prev - 1e-13, "s = {s}");
            prev = cur;
        }
    }

    #[test]
    fn v_norm_matches_direct_sum() {
        // d = 2 labels; e_{2,1} has weight 2^3 * 1^3 = 8.
        let labels = vec![vec![1, 1], vec![2, 1], vec![1, 2]];
        let e21 = StateCoeffs::basis(3, 1);
        assert_abs_diff_eq!(v_norm(&e21, &labels), 8.0, epsilon = 1e-14);
        let z = StateCoeffs::new(vec![
            C64::new(0.1, -0.2),
            C64::new(0.4, 0.3),
            C64::new(-0.2, 0.05),
        ]);
        let direct: f64 = [(1.0, 0), (8.0, 1), (8.0, 2)]
            .iter()
            .map(|&(w, i): &(f64, usize)| w * w * z.coeffs()[i].norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert_abs_diff_eq!(v_norm(&z, &labels), direct, epsilon = 1e-13);
    }

    #[test]
    fn asymptotics_flat_and_constant_potentials() {
        let sys = solve_sturm_liouville(&Potential::zero(1025), 8, 1024).unwrap();
        let rep = check_asymptotics(&sys, &Potential::zero(1025));
        for &r in &rep.remainders {
            assert!(r.abs() <= 1e-6, "remainder {r}");
        }
        for &e in &rep.sup_mode_err {
            assert!(e <= 1e-6);
        }
        assert!(!rep.growth_flag);

        let c = Potential::constant(1025, 5.0);
        let sys5 = solve_sturm_liouville(&c, 8, 1024).unwrap();
        let rep5 = check_asymptotics(&sys5, &c);
        for &r in &rep5.remainders {
            assert!(r.abs() <= 1e-6, "remainder {r}");
        }
    }

    #[test]
    fn isotonic_fit_pools_violators() {
        let fit = isotonic_fit(&[3.0, 1.0, 2.0, 4.0]);
        assert_abs_diff_eq!(fit[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit[1], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit[2], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit[3], 4.0, epsilon = 1e-15);
        // Already monotone data is untouched.
        let flat = isotonic_fit(&[1.0, 2.0, 3.0]);
        assert_eq!(flat, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn growth_trend_ignores_transients_and_flags_linear_growth() {
        // Low-index transient onto a plateau: bounded, no trend.
        let mut plateau = vec![0.08];
        plateau.extend(core::iter::repeat(0.28).take(31));
        assert!(!growing_tail(&plateau));
        // Noisy flat sequence: no trend.
        let noisy: Vec<f64> = (0..32).map(|i| 0.3 + 0.01 * ((i * 7 % 5) as f64)).collect();
        assert!(!growing_tail(&noisy));
        // Linear growth keeps rising in the upper half: flagged.
        let linear: Vec<f64> = (1..=32).map(|i| 0.02 * i as f64).collect();
        assert!(growing_tail(&linear));
    }

    #[test]
    fn state_coeffs_basics() {
        let z = StateCoeffs::new(vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)]);
        assert_abs_diff_eq!(z.l2_norm(), 5.0, epsilon = 1e-15);
        let n = z.normalized().unwrap();
        assert_abs_diff_eq!(n.l2_norm(), 1.0, epsilon = 1e-15);
        let w = StateCoeffs::new(vec![C64::new(0.0, 1.0), C64::new(1.0, 0.0)]);
        // <z, w> = 3 * conj(i) + 4i * conj(1) = -3i + 4i = i.
        let ip = z.inner(&w);
        assert_abs_diff_eq!(ip.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ip.im, 1.0, epsilon = 1e-15);
        assert!(StateCoeffs::zeros(3).normalized().is_err());
    }
}
