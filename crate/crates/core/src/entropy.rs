//! Empirical covering-entropy probe of small-time reachable sets.
//!
//! The probe draws rough controls from a W^{1,1} ball, propagates them to
//! random times, and compares the covering-number growth of the resulting
//! state cloud against a same-size cloud drawn from a weighted coefficient
//! ball on the sphere. The reachable cloud's covering exponent is strictly
//! smaller; the gap, with a bootstrap confidence bound, is the reported
//! evidence that the flow cannot fill a smoothness ball.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::propagator::propagate;
use crate::signal::PiecewiseLinear;
use crate::spectral::StateCoeffs;
use crate::C64;
#[allow(unused_imports)]
use num_traits::Float as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rough controls drawn from a W^{1,1} ball, with their evaluation times.
#[derive(Clone, Debug)]
pub struct ControlBallSample {
    /// Ball radius: every control satisfies ||u||_{W^{1,1}} <= m (+1e-9).
    pub m: f64,
    /// Piecewise-linear controls, all on the horizon [0, m].
    pub controls: Vec<PiecewiseLinear>,
    /// Evaluation time of each control, in (0, m].
    pub times: Vec<f64>,
    /// The seed that produced the sample.
    pub seed: u64,
}

/// Draw `count` piecewise-linear controls with `knots` knots from the
/// W^{1,1} ball of radius `m` (knot values uniform, rescaled onto the ball
/// when the drawn norm exceeds it), each paired with a uniform evaluation
/// time in (0, m]. Deterministic in `seed`.
pub fn sample_control_ball(
    m: f64,
    count: usize,
    knots: usize,
    seed: u64,
) -> Result<ControlBallSample> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Invalid(format!("bad ball radius {m}")));
    }
    if count < 2 {
        return Err(Error::Invalid(format!("need at least 2 samples, got {count}")));
    }
    if knots < 2 {
        return Err(Error::Invalid(format!("need at least 2 knots, got {knots}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut controls = Vec::with_capacity(count);
    let mut times = Vec::with_capacity(count);
    for _ in 0..count {
        let values: Vec<f64> =
            (0..knots).map(|_| rng.gen_range(-m..m)).collect();
        let mut u = PiecewiseLinear::from_values(m, values)?;
        let norm = u.w11_norm();
        if norm > m {
            u = u.scaled(m / norm);
        }
        controls.push(u);
        // Uniform in (0, m]: reject the measure-zero zero time.
        let mut t = rng.gen_range(0.0..m);
        if t == 0.0 {
            t = m;
        }
        times.push(t);
    }
    Ok(ControlBallSample {
        m,
        controls,
        times,
        seed,
    })
}

/// Propagate `z0` under each sampled control to its evaluation time. The
/// endpoints stay on the unit sphere within the integrator's drift.
pub fn reachable_cloud(
    z0: &StateCoeffs,
    sample: &ControlBallSample,
    c: &CouplingMatrix,
    dt: f64,
) -> Result<Vec<StateCoeffs>> {
    let mut cloud = Vec::with_capacity(sample.controls.len());
    for (u, &t) in sample.controls.iter().zip(&sample.times) {
        let traj = propagate(z0, u, c, t, dt, usize::MAX)?;
        cloud.push(traj.final_state().clone());
    }
    Ok(cloud)
}

/// Distance in the weighted coefficient norm with weights lambda^order
/// (order 0 is the plain norm).
fn weighted_distance(
    a: &StateCoeffs,
    b: &StateCoeffs,
    lambdas: &[f64],
    order: f64,
) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .zip(lambdas)
        .map(|((x, y), l)| {
            let w = if order == 0.0 { 1.0 } else { l.powf(order) };
            w * (x - y).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Greedy covering count of a point cloud at scale `eps` in the weighted
/// norm of order `norm_order`: points are scanned in index order and become
/// centers unless within 2 eps of an existing center. The result is a
/// 2 eps-cover whose centers are 2 eps-separated, so it brackets the true
/// covering number between scales eps and 2 eps. Deterministic.
pub fn covering_number(
    points: &[StateCoeffs],
    lambdas: &[f64],
    norm_order: f64,
    eps: f64,
) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::Invalid("empty point cloud".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Invalid(format!("bad scale {eps}")));
    }
    let mut centers: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let covered = centers.iter().any(|&ci| {
            weighted_distance(p, &points[ci], lambdas, norm_order) <= 2.0 * eps
        });
        if !covered {
            centers.push(i);
        }
    }
    Ok(centers.len())
}

/// Knobs of an entropy probe.
#[derive(Clone, Debug)]
pub struct EntropyConfig {
    /// W^{1,1} ball radius and time horizon of the control sample.
    pub m: f64,
    /// Cloud size (at least 50).
    pub count: usize,
    /// Knots per sampled control.
    pub knots: usize,
    /// Master seed; the control, comparison, and bootstrap streams derive
    /// from seed, seed + 1, seed + 2.
    pub seed: u64,
    /// Smoothness order of the comparison ball.
    pub k_order: f64,
    /// Propagation step.
    pub dt: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            m: 1.0,
            count: 400,
            knots: 16,
            seed: 0,
            k_order: 0.5,
            dt: 1e-3,
        }
    }
}

/// Output of an entropy probe.
#[derive(Clone, Debug)]
pub struct EntropyReport {
    /// Scales of the covering scan, ascending.
    pub epsilons: Vec<f64>,
    /// Greedy covering counts of the reachable cloud per scale.
    pub counts_reachable: Vec<usize>,
    /// Greedy covering counts of the comparison ball cloud per scale.
    pub counts_ball: Vec<usize>,
    /// Fitted covering exponent of the reachable cloud:
    /// slope of log log N against log(1/eps).
    pub slope_reachable: f64,
    /// Fitted covering exponent of the ball cloud.
    pub slope_ball: f64,
    /// slope_ball - slope_reachable.
    pub slope_gap: f64,
    /// 2.5th percentile of the bootstrap gap distribution; a positive value
    /// separates the exponents at the 95% level.
    pub gap_ci_low: f64,
    /// Largest plain-norm state distance per unit of control distance
    /// (|dt| + L1 gap) over sample pairs.
    pub holder_plain: f64,
    /// Largest order-(k-1) weighted state distance per control distance
    /// raised to 1/k, over sample pairs.
    pub holder_weighted: f64,
    /// Points per cloud.
    pub n_points: usize,
    /// Smoothness order of the comparison ball.
    pub k_order: f64,
    /// Master seed.
    pub seed: u64,
}

/// Slope of y against x by least squares.
fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let xbar = xs.iter().sum::<f64>() / n as f64;
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - xbar) * (y - ybar);
        den += (x - xbar) * (x - xbar);
    }
    if den <= 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Covering exponent of `counts` over `epsilons`: fit log log N against
/// log(1/eps), dropping scales where the cloud collapses to one center.
fn entropy_slope(epsilons: &[f64], counts: &[usize]) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&eps, &n) in epsilons.iter().zip(counts) {
        if n >= 2 {
            xs.push((1.0 / eps).ln());
            ys.push((n as f64).ln().ln());
        }
    }
    ls_slope(&xs, &ys)
}

/// Greedy covering count over a sub-cloud given a cached distance matrix
/// (row-major over the full cloud). Indices must be sorted ascending.
fn covering_count_cached(
    dist: &[f64],
    n_total: usize,
    indices: &[usize],
    eps: f64,
) -> usize {
    let mut centers: Vec<usize> = Vec::new();
    for &i in indices {
        let covered = centers
            .iter()
            .any(|&ci| dist[i * n_total + ci] <= 2.0 * eps);
        if !covered {
            centers.push(i);
        }
    }
    centers.len()
}

/// Percentile of a sorted slice by nearest-rank interpolation.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

const N_SCALES: usize = 8;
const N_BOOTSTRAP: usize = 200;

/// Run the covering-entropy probe from `z0`.
///
/// Draws the control cloud with seed, the comparison ball cloud (complex
/// gaussian coefficients with deviations lambda_j^{-k/2}, normalized to the
/// sphere) with seed + 1, scans 8 log-spaced scales between the 10th and
/// 60th percentile of the pooled pairwise distances, fits both covering
/// exponents, and bootstraps the gap (seed + 2, 200 resamples). Errors on
/// fewer than 50 points or degenerate clouds.
pub fn entropy_report(
    z0: &StateCoeffs,
    c: &CouplingMatrix,
    cfg: &EntropyConfig,
) -> Result<EntropyReport> {
    if cfg.count < 50 {
        return Err(Error::Invalid(format!(
            "need at least 50 points for a slope estimate, got {}",
            cfg.count
        )));
    }
    if !(cfg.k_order > 0.0 && cfg.k_order.is_finite()) {
        return Err(Error::Invalid(format!("bad ball order {}", cfg.k_order)));
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::Invalid(format!("bad step {}", cfg.dt)));
    }
    let n = c.n();
    if z0.len() != n {
        return Err(Error::Invalid(format!(
            "state has {} modes, coupling has {n}",
            z0.len()
        )));
    }
    let z0 = z0.normalized()?;
    let lambdas = c.lambdas();
    let count = cfg.count;

    // Reachable cloud: rough controls propagated to random times.
    let sample = sample_control_ball(cfg.m, count, cfg.knots, cfg.seed)?;
    let reachable = reachable_cloud(&z0, &sample, c, cfg.dt)?;

    // Comparison cloud: weighted coefficient ball sliced by the sphere.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut ball = Vec::with_capacity(count);
    for _ in 0..count {
        let coeffs: Vec<C64> = lambdas
            .iter()
            .map(|l| {
                let sigma = l.powf(-cfg.k_order / 2.0);
                // Box-Muller pairs give rotation-invariant complex entries.
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..core::f64::consts::TAU);
                let r = sigma * (-2.0 * u1.ln()).sqrt();
                C64::from_polar(r, u2)
            })
            .collect();
        ball.push(StateCoeffs::new(coeffs).normalized()?);
    }

    // Cached plain-norm distance matrices.
    let dist_of = |cloud: &[StateCoeffs]| -> Vec<f64> {
        let mut d = vec![0.0; count * count];
        for i in 0..count {
            for j in 0..i {
                let v = weighted_distance(&cloud[i], &cloud[j], lambdas, 0.0);
                d[i * count + j] = v;
                d[j * count + i] = v;
            }
        }
        d
    };
    let dist_reach = dist_of(&reachable);
    let dist_ball = dist_of(&ball);

    // Scales: log-spaced between pooled distance percentiles.
    let mut pooled: Vec<f64> = dist_reach
        .iter()
        .chain(dist_ball.iter())
        .cloned()
        .filter(|d| *d > 0.0)
        .collect();
    if pooled.is_empty() {
        return Err(Error::Invalid("all points coincide".into()));
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let lo = percentile(&pooled, 0.10);
    let hi = percentile(&pooled, 0.60);
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Invalid(format!(
            "degenerate distance spread [{lo}, {hi}]"
        )));
    }
    let epsilons: Vec<f64> = (0..N_SCALES)
        .map(|i| {
            let f = i as f64 / (N_SCALES - 1) as f64;
            (lo.ln() + f * (hi.ln() - lo.ln())).exp()
        })
        .collect();

    let all: Vec<usize> = (0..count).collect();
    let counts_reachable: Vec<usize> = epsilons
        .iter()
        .map(|&e| covering_count_cached(&dist_reach, count, &all, e))
        .collect();
    let counts_ball: Vec<usize> = epsilons
        .iter()
        .map(|&e| covering_count_cached(&dist_ball, count, &all, e))
        .collect();

    let slope_reachable = entropy_slope(&epsilons, &counts_reachable)
        .ok_or_else(|| {
            Error::Invalid("reachable covering counts are degenerate".into())
        })?;
    let slope_ball =
        entropy_slope(&epsilons, &counts_ball).ok_or_else(|| {
            Error::Invalid("ball covering counts are degenerate".into())
        })?;
    let slope_gap = slope_ball - slope_reachable;

    // Bootstrap the gap over index resamples, sharing the cached distances.
    let mut boot = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut gaps = Vec::with_capacity(N_BOOTSTRAP);
    for _ in 0..N_BOOTSTRAP {
        let mut draw = |_: &()| -> Vec<usize> {
            let mut idx: Vec<usize> =
                (0..count).map(|_| boot.gen_range(0..count)).collect();
            idx.sort_unstable();
            idx.dedup();
            idx
        };
        let idx_r = draw(&());
        let idx_b = draw(&());
        let cr: Vec<usize> = epsilons
            .iter()
            .map(|&e| covering_count_cached(&dist_reach, count, &idx_r, e))
            .collect();
        let cb: Vec<usize> = epsilons
            .iter()
            .map(|&e| covering_count_cached(&dist_ball, count, &idx_b, e))
            .collect();
        if let (Some(sr), Some(sb)) = (
            entropy_slope(&epsilons, &cr),
            entropy_slope(&epsilons, &cb),
        ) {
            gaps.push(sb - sr);
        }
    }
    if gaps.len() < N_BOOTSTRAP / 4 {
        return Err(Error::Invalid(
            "bootstrap produced too few valid resamples".into(),
        ));
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
    let gap_ci_low = percentile(&gaps, 0.025);

    // Empirical continuity constants of the control-to-state map over the
    // sampled pairs: plain norm per unit control distance, and the weighted
    // order-(k-1) norm per control distance to the power 1/k.
    let mut holder_plain = 0.0f64;
    let mut holder_weighted = 0.0f64;
    for i in 0..count {
        for j in 0..i {
            let du = sample.controls[i].l1_distance(&sample.controls[j])
                + (sample.times[i] - sample.times[j]).abs();
            if du <= 1e-12 {
                continue;
            }
            holder_plain = holder_plain.max(dist_reach[i * count + j] / du);
            let dz = weighted_distance(
                &reachable[i],
                &reachable[j],
                lambdas,
                cfg.k_order - 1.0,
            );
            holder_weighted =
                holder_weighted.max(dz / du.powf(1.0 / cfg.k_order));
        }
    }

    Ok(EntropyReport {
        epsilons,
        counts_reachable,
        counts_ball,
        slope_reachable,
        slope_ball,
        slope_gap,
        gap_ci_low,
        holder_plain,
        holder_weighted,
        n_points: count,
        k_order: cfg.k_order,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::coupling_matrix;
    use crate::signal::Control;
    use crate::spectral::{solve_sturm_liouville, Potential};
    use alloc::vec;

    fn box_coupling(n: usize, n_grid: usize) -> CouplingMatrix {
        let v = Potential::zero(n_grid + 1);
        let eig = solve_sturm_liouville(&v, n, n_grid).unwrap();
        let profile = Potential::from_fn(n_grid + 1, |x| x * x).unwrap();
        coupling_matrix(&profile, &eig, n).unwrap()
    }

    #[test]
    fn control_sample_is_deterministic_and_inside_the_ball() {
        let a = sample_control_ball(1.5, 40, 8, 9).unwrap();
        let b = sample_control_ball(1.5, 40, 8, 9).unwrap();
        for (ua, ub) in a.controls.iter().zip(&b.controls) {
            assert_eq!(ua.values(), ub.values());
        }
        assert_eq!(a.times, b.times);
        for (u, &t) in a.controls.iter().zip(&a.times) {
            assert!(u.w11_norm() <= 1.5 + 1e-9, "norm {}", u.w11_norm());
            assert!(t > 0.0 && t <= 1.5);
        }
        // A different seed changes the draw.
        let cdraw = sample_control_ball(1.5, 40, 8, 10).unwrap();
        assert!(a
            .controls
            .iter()
            .zip(&cdraw.controls)
            .any(|(x, y)| x.values() != y.values()));
        // Bad arguments.
        assert!(sample_control_ball(0.0, 40, 8, 0).is_err());
        assert!(sample_control_ball(1.0, 1, 8, 0).is_err());
        assert!(sample_control_ball(1.0, 40, 1, 0).is_err());
    }

    #[test]
    fn sampled_l1_norms_match_a_quadrature_oracle() {
        // The closed-form L1 norm of each sampled control against dense
        // trapezoid integration of |u(t)|: mean relative error within 2%.
        let sample = sample_control_ball(2.0, 30, 12, 21).unwrap();
        let mut rel_sum = 0.0;
        for u in &sample.controls {
            let exact = u.l1_norm();
            let steps = 4000;
            let h = u.horizon() / steps as f64;
            let mut quad = 0.0;
            for i in 0..=steps {
                let v = u.value(i as f64 * h).abs();
                quad += if i == 0 || i == steps { 0.5 * v } else { v };
            }
            quad *= h;
            rel_sum += (quad - exact).abs() / exact.max(1e-12);
        }
        let mean_rel = rel_sum / sample.controls.len() as f64;
        assert!(mean_rel <= 0.02, "mean relative error {mean_rel:.4}");
    }

    #[test]
    fn reachable_cloud_stays_on_the_sphere() {
        let c = box_coupling(4, 512);
        let z0 = StateCoeffs::basis(4, 0);
        let sample = sample_control_ball(1.0, 10, 6, 3).unwrap();
        let cloud = reachable_cloud(&z0, &sample, &c, 1e-3).unwrap();
        assert_eq!(cloud.len(), 10);
        for z in &cloud {
            assert!((z.l2_norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn covering_handles_trivial_clouds() {
        let lambdas = [1.0, 2.0];
        let p = |re: f64| {
            StateCoeffs::new(vec![C64::new(re, 0.0), C64::new(0.0, 0.0)])
        };
        assert!(covering_number(&[], &lambdas, 0.0, 0.1).is_err());
        assert!(covering_number(&[p(0.0)], &lambdas, 0.0, 0.0).is_err());
        // One point: one center at any scale.
        assert_eq!(covering_number(&[p(0.3)], &lambdas, 0.0, 0.01).unwrap(), 1);
        // Two points 1 apart: split below distance/2, merge above.
        let cloud = [p(0.0), p(1.0)];
        assert_eq!(covering_number(&cloud, &lambdas, 0.0, 0.4).unwrap(), 2);
        assert_eq!(covering_number(&cloud, &lambdas, 0.0, 0.6).unwrap(), 1);
        // The weighted metric rescales distances: at order 1 with lambda 2
        // on mode 0 the gap becomes sqrt(2), so scale 0.6 no longer merges.
        let heavy = [2.0, 3.0];
        assert_eq!(covering_number(&cloud, &heavy, 1.0, 0.6).unwrap(), 2);
    }

    #[test]
    fn covering_counts_shrink_as_the_scale_grows() {
        let c = box_coupling(3, 512);
        let z0 = StateCoeffs::basis(3, 0);
        let sample = sample_control_ball(1.2, 25, 6, 17).unwrap();
        let cloud = reachable_cloud(&z0, &sample, &c, 2e-3).unwrap();
        let lambdas = c.lambdas();
        let mut prev = usize::MAX;
        for i in 0..6 {
            let eps = 0.02 * 1.8f64.powi(i);
            let n = covering_number(&cloud, lambdas, 0.0, eps).unwrap();
            assert!(n <= prev, "covering count grew with the scale");
            prev = n;
        }
        assert_eq!(covering_number(&cloud, lambdas, 0.0, 1e6).unwrap(), 1);
    }

    #[test]
    fn greedy_count_brackets_a_maximum_packing_oracle() {
        // On a small cloud, brute-force the maximum 2eps-separated subset:
        // the greedy count can never exceed it and reaches at least half.
        let c = box_coupling(3, 512);
        let z0 = StateCoeffs::basis(3, 0);
        let sample = sample_control_ball(1.2, 12, 5, 29).unwrap();
        let cloud = reachable_cloud(&z0, &sample, &c, 2e-3).unwrap();
        let lambdas = c.lambdas();
        let n = cloud.len();
        for &eps in &[0.05, 0.1, 0.2] {
            let greedy = covering_number(&cloud, lambdas, 0.0, eps).unwrap();
            let mut best = 0usize;
            for mask in 1u32..(1 << n) {
                let idx: Vec<usize> =
                    (0..n).filter(|&i| mask & (1 << i) != 0).collect();
                let ok = idx.iter().enumerate().all(|(a, &i)| {
                    idx[..a].iter().all(|&j| {
                        weighted_distance(&cloud[i], &cloud[j], lambdas, 0.0)
                            > 2.0 * eps
                    })
                });
                if ok {
                    best = best.max(idx.len());
                }
            }
            assert!(greedy <= best, "greedy {greedy} exceeds maximum {best}");
            assert!(
                2 * greedy >= best,
                "greedy {greedy} below half of maximum {best}"
            );
        }
    }

    #[test]
    fn entropy_slope_recovers_a_synthetic_exponent() {
        // Counts following ln N = (1/eps)^1.4 must fit exponent 1.4 up to
        // the integer rounding of the counts.
        let ratio = 5.0f64.powf(1.0 / 7.0);
        let epsilons: Vec<f64> =
            (0..8).map(|i| 0.2 * ratio.powi(i)).collect();
        let counts: Vec<usize> = epsilons
            .iter()
            .map(|e| (1.0 / e).powf(1.4).exp().round() as usize)
            .collect();
        assert!(counts.iter().all(|&n| n >= 2 && n < 20_000));
        let slope = entropy_slope(&epsilons, &counts).unwrap();
        assert!((slope - 1.4).abs() <= 0.1, "slope {slope}");
    }

    #[test]
    fn report_is_deterministic_and_separates_the_clouds() {
        let c = box_coupling(8, 1024);
        let z0 = StateCoeffs::basis(8, 0);
        let cfg = EntropyConfig {
            count: 60,
            dt: 2e-3,
            seed: 5,
            ..EntropyConfig::default()
        };
        let a = entropy_report(&z0, &c, &cfg).unwrap();
        let b = entropy_report(&z0, &c, &cfg).unwrap();
        assert_eq!(a.epsilons, b.epsilons);
        assert_eq!(a.counts_reachable, b.counts_reachable);
        assert_eq!(a.counts_ball, b.counts_ball);
        assert_eq!(a.slope_gap, b.slope_gap);
        assert_eq!(a.gap_ci_low, b.gap_ci_low);
        // The ball cloud spreads over more directions than the flow can
        // reach in small time; its exponent is larger.
        assert!(
            a.slope_gap > 0.0,
            "expected a positive exponent gap, got {}",
            a.slope_gap
        );
        assert!(a.holder_plain > 0.0 && a.holder_plain.is_finite());
        assert!(a.holder_weighted > 0.0 && a.holder_weighted.is_finite());
        assert_eq!(a.n_points, 60);
    }

    #[test]
    fn report_rejects_small_or_bad_configs() {
        let c = box_coupling(3, 512);
        let z0 = StateCoeffs::basis(3, 0);
        let small = EntropyConfig {
            count: 20,
            ..EntropyConfig::default()
        };
        assert!(entropy_report(&z0, &c, &small).is_err());
        let bad_dt = EntropyConfig {
            count: 50,
            dt: -1.0,
            ..EntropyConfig::default()
        };
        assert!(entropy_report(&z0, &c, &bad_dt).is_err());
        let bad_k = EntropyConfig {
            count: 50,
            k_order: 0.0,
            ..EntropyConfig::default()
        };
        assert!(entropy_report(&z0, &c, &bad_k).is_err());
    }
}
