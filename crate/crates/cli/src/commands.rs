//! The ten experiment commands.
//!
//! Each command builds its operators from the resolved config, runs one
//! experiment, writes CSV artifacts, and returns a serializable result for
//! the report. All randomness comes from one ChaCha stream seeded by the
//! resolved seed; draws happen in a fixed order (state first, then control
//! or target), so reruns are byte-identical.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qsteer_core::{
    check_condition_i, check_condition_ii, coupling_matrix, entropy_report, find_return_time,
    hs_norm, linearized_endpoint, linearized_propagate, newton_control, project_tangent,
    propagate, solve_sturm_liouville, synthesize_control, target_to_moments, verify_return, C64,
    Control, ControlSignal, CouplingMatrix, EigenSystem, EntropyConfig, MomentTable, NewtonConfig,
    Potential, StateCoeffs,
};

use crate::config::{self, Config};
use crate::report::{read_input, InputHash, OutDir};
use crate::{map_core, CliError, RunArgs};

pub(crate) fn dispatch(name: &str, args: &RunArgs) -> Result<(), CliError> {
    let mut inputs: Vec<InputHash> = Vec::new();
    let text = read_input(&args.config, &mut inputs)?;
    let mut cfg = config::parse(&text).map_err(CliError::Validation)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    let mut out = OutDir::create(&args.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "eig" => {
            let r = cmd_eig(&cfg, &mut inputs, &mut out)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "coupling" => {
            let r = cmd_coupling(&cfg, &mut inputs, &mut out)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "check" => {
            let r = cmd_check(&cfg, &mut inputs)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "simulate" => {
            let r = cmd_simulate(&cfg, &mut inputs, &mut out, &mut rng)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "return-time" => {
            let r = cmd_return_time(&cfg, &mut inputs, &mut rng)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "linearize" => {
            let r = cmd_linearize(&cfg, &mut inputs, &mut out, &mut rng)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "moments" => {
            let r = cmd_moments(&cfg, &mut inputs, &mut out, &mut rng)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "synth" => {
            let r = cmd_synth(&cfg, &mut inputs, &mut out, &mut rng)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "steer" => {
            let r = cmd_steer(&cfg, &mut inputs, &mut out, &mut rng)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        "entropy" => {
            let r = cmd_entropy(&cfg, &mut inputs, &mut out, &mut rng)?;
            out.finish(name, seed, &inputs, &cfg, r)
        }
        other => Err(CliError::Validation(format!("unknown command {other}"))),
    }
}

// ---------------------------------------------------------------- builders

/// Realizes a named shape on the grid with `n_grid + 1` points.
fn build_shape(
    kind: &str,
    amplitude: f64,
    file: Option<&str>,
    n_grid: usize,
    inputs: &mut Vec<InputHash>,
) -> Result<Potential, CliError> {
    let n_points = n_grid + 1;
    match kind {
        "zero" => Ok(Potential::zero(n_points)),
        "constant" => Potential::from_fn(n_points, |_| amplitude).map_err(map_core),
        "linear" => Potential::from_fn(n_points, |x| amplitude * x).map_err(map_core),
        "sine" => Potential::from_fn(n_points, |x| amplitude * (PI * x).sin()).map_err(map_core),
        "quadratic" => Potential::from_fn(n_points, |x| amplitude * x * x).map_err(map_core),
        "file" => {
            let path = file.ok_or_else(|| {
                CliError::Validation("shape `file` needs a `file` key with a path".into())
            })?;
            let samples = read_xy(Path::new(path), inputs)?;
            let values = resample(&samples, n_points)
                .into_iter()
                .map(|v| amplitude * v)
                .collect();
            Potential::from_samples(values).map_err(map_core)
        }
        other => Err(CliError::Validation(format!("unknown shape `{other}`"))),
    }
}

fn build_potential(cfg: &Config, inputs: &mut Vec<InputHash>) -> Result<Potential, CliError> {
    build_shape(
        &cfg.potential.kind,
        cfg.potential.amplitude,
        cfg.potential.file.as_deref(),
        cfg.coupling.n_grid,
        inputs,
    )
}

fn build_system(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
) -> Result<(EigenSystem, CouplingMatrix), CliError> {
    let v = build_potential(cfg, inputs)?;
    let sys =
        solve_sturm_liouville(&v, cfg.coupling.n_modes, cfg.coupling.n_grid).map_err(map_core)?;
    let mu = build_shape(
        &cfg.coupling.profile,
        cfg.coupling.amplitude,
        cfg.coupling.file.as_deref(),
        cfg.coupling.n_grid,
        inputs,
    )?;
    let c = coupling_matrix(&mu, &sys, cfg.coupling.n_modes).map_err(map_core)?;
    Ok((sys, c))
}

/// Two-column `x,value` CSV, sorted by x after reading.
fn read_xy(path: &Path, inputs: &mut Vec<InputHash>) -> Result<Vec<(f64, f64)>, CliError> {
    let text = read_input(path, inputs)?;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = || {
            CliError::Validation(format!(
                "{}:{}: expected `x,value` with finite numbers",
                path.display(),
                idx + 1
            ))
        };
        let (a, b) = t.split_once(',').ok_or_else(bad)?;
        let x: f64 = a.trim().parse().map_err(|_| bad())?;
        let v: f64 = b.trim().parse().map_err(|_| bad())?;
        if !x.is_finite() || !v.is_finite() {
            return Err(bad());
        }
        rows.push((x, v));
    }
    if rows.len() < 2 {
        return Err(CliError::Validation(format!(
            "{}: needs at least two sample rows",
            path.display()
        )));
    }
    rows.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(rows)
}

/// Linear interpolation onto the uniform grid over [0, 1], constant beyond
/// the sampled range.
fn resample(points: &[(f64, f64)], n_points: usize) -> Vec<f64> {
    let denom = (n_points - 1).max(1) as f64;
    (0..n_points)
        .map(|i| {
            let x = i as f64 / denom;
            if x <= points[0].0 {
                return points[0].1;
            }
            let (x_last, v_last) = points[points.len() - 1];
            if x >= x_last {
                return v_last;
            }
            let idx = points.partition_point(|p| p.0 <= x);
            let (x0, v0) = points[idx - 1];
            let (x1, v1) = points[idx];
            if x1 == x0 {
                v0
            } else {
                v0 + (v1 - v0) * (x - x0) / (x1 - x0)
            }
        })
        .collect()
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Result<StateCoeffs, CliError> {
    let coeffs: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    StateCoeffs::new(coeffs).normalized().map_err(map_core)
}

/// `re,im` rows, one per mode; the count must match `n`.
fn read_state_file(
    path: &Path,
    n: usize,
    inputs: &mut Vec<InputHash>,
) -> Result<StateCoeffs, CliError> {
    let text = read_input(path, inputs)?;
    let mut coeffs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = || {
            CliError::Validation(format!(
                "{}:{}: expected `re,im` with finite numbers",
                path.display(),
                idx + 1
            ))
        };
        let (a, b) = t.split_once(',').ok_or_else(bad)?;
        let re: f64 = a.trim().parse().map_err(|_| bad())?;
        let im: f64 = b.trim().parse().map_err(|_| bad())?;
        if !re.is_finite() || !im.is_finite() {
            return Err(bad());
        }
        coeffs.push(C64::new(re, im));
    }
    if coeffs.len() != n {
        return Err(CliError::Validation(format!(
            "{}: has {} coefficient rows, the system has {} modes",
            path.display(),
            coeffs.len(),
            n
        )));
    }
    Ok(StateCoeffs::new(coeffs))
}

/// Resolves a state spec to a unit-norm state.
///
/// Specs: `basis:k` (1-based mode), `modes:a,b,...` (equal-weight real
/// superposition), `balanced:p,q` (two-mode state whose populations balance
/// the diagonal couplings), `random`, `file:path`.
fn build_state(
    spec: &str,
    n: usize,
    c: &CouplingMatrix,
    rng: &mut ChaCha8Rng,
    inputs: &mut Vec<InputHash>,
) -> Result<StateCoeffs, CliError> {
    let parse_mode = |txt: &str| -> Result<usize, CliError> {
        let k: usize = txt
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("bad mode index `{txt}` in `{spec}`")))?;
        if k == 0 || k > n {
            return Err(CliError::Validation(format!(
                "mode {k} outside 1..={n} in `{spec}`"
            )));
        }
        Ok(k)
    };
    if spec == "random" {
        return random_unit(n, rng);
    }
    if let Some(rest) = spec.strip_prefix("basis:") {
        let k = parse_mode(rest)?;
        return Ok(StateCoeffs::basis(n, k - 1));
    }
    if let Some(rest) = spec.strip_prefix("modes:") {
        let mut ks = Vec::new();
        for part in rest.split(',') {
            let k = parse_mode(part)?;
            if ks.contains(&k) {
                return Err(CliError::Validation(format!(
                    "repeated mode {k} in `{spec}`"
                )));
            }
            ks.push(k);
        }
        let w = 1.0 / (ks.len() as f64).sqrt();
        let mut coeffs = vec![C64::new(0.0, 0.0); n];
        for k in ks {
            coeffs[k - 1] = C64::new(w, 0.0);
        }
        return Ok(StateCoeffs::new(coeffs));
    }
    if let Some(rest) = spec.strip_prefix("balanced:") {
        let (a_txt, b_txt) = rest.split_once(',').ok_or_else(|| {
            CliError::Validation(format!("`{spec}` needs two modes, e.g. balanced:1,2"))
        })?;
        let a = parse_mode(a_txt)?;
        let b = parse_mode(b_txt)?;
        if a == b {
            return Err(CliError::Validation(format!(
                "balanced modes must differ in `{spec}`"
            )));
        }
        let qa = c.q(a - 1, a - 1);
        let qb = c.q(b - 1, b - 1);
        if qa * qb <= 0.0 {
            return Err(CliError::Validation(format!(
                "diagonal couplings {qa:.3e} and {qb:.3e} cannot balance"
            )));
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); n];
        coeffs[a - 1] = C64::new((qb / (qa + qb)).sqrt(), 0.0);
        coeffs[b - 1] = C64::new((qa / (qa + qb)).sqrt(), 0.0);
        return Ok(StateCoeffs::new(coeffs));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let state = read_state_file(Path::new(path.trim()), n, inputs)?;
        return state.normalized().map_err(map_core);
    }
    Err(CliError::Validation(format!(
        "bad state spec `{spec}` (expected basis:k, modes:a,b, balanced:p,q, random, or file:path)"
    )))
}

/// Resolves a tangent-target spec: `random` draws a smooth direction and
/// scales it to `scale` before projection; `file:path` reads raw
/// coefficients and projects them onto the tangent space at `base`.
///
/// Random draws are damped mode by mode with (lambda_1 / lambda_k)^6, so
/// the direction lies in the smooth class whose moment targets the atom
/// bank can actually reach; an undamped draw concentrates its weighted mass
/// at frequencies far outside the bank's band.
fn build_target(
    spec: &str,
    scale: f64,
    base: &StateCoeffs,
    c: &CouplingMatrix,
    rng: &mut ChaCha8Rng,
    inputs: &mut Vec<InputHash>,
) -> Result<StateCoeffs, CliError> {
    let raw = if spec == "random" {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(CliError::Validation(format!(
                "target_scale must be positive, got {scale}"
            )));
        }
        let white = random_unit(base.len(), rng)?;
        let lambdas = c.lambdas();
        let damped: Vec<C64> = white
            .coeffs()
            .iter()
            .zip(lambdas)
            .map(|(z, l)| z * (lambdas[0] / l).powi(6))
            .collect();
        let unit = StateCoeffs::new(damped).normalized().map_err(map_core)?;
        let coeffs = unit.coeffs().iter().map(|z| z * scale).collect();
        StateCoeffs::new(coeffs)
    } else if let Some(path) = spec.strip_prefix("file:") {
        read_state_file(Path::new(path.trim()), base.len(), inputs)?
    } else {
        return Err(CliError::Validation(format!(
            "bad target spec `{spec}` (expected random or file:path)"
        )));
    };
    Ok(project_tangent(&raw, base))
}

/// Resolves the `[simulation]` control spec.
fn build_control(
    cfg: &Config,
    rng: &mut ChaCha8Rng,
    inputs: &mut Vec<InputHash>,
) -> Result<ControlSignal, CliError> {
    let sim = &cfg.simulation;
    let horizon = sim.control_horizon.unwrap_or(sim.t_final);
    match sim.control.as_str() {
        "none" => ControlSignal::new(horizon, sim.control_atoms).map_err(map_core),
        "random" => {
            if !(sim.control_scale.is_finite() && sim.control_scale > 0.0) {
                return Err(CliError::Validation(format!(
                    "control_scale must be positive, got {}",
                    sim.control_scale
                )));
            }
            let w: Vec<f64> = (0..sim.control_atoms)
                .map(|_| rng.gen_range(-sim.control_scale..sim.control_scale))
                .collect();
            ControlSignal::with_weights(horizon, w).map_err(map_core)
        }
        spec => {
            let path = spec.strip_prefix("file:").ok_or_else(|| {
                CliError::Validation(format!(
                    "bad control spec `{spec}` (expected none, random, or file:path)"
                ))
            })?;
            let text = read_input(Path::new(path.trim()), inputs)?;
            let mut w = Vec::new();
            for (idx, raw) in text.lines().enumerate() {
                let t = raw.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                let v: f64 = t.parse().map_err(|_| {
                    CliError::Validation(format!(
                        "{}:{}: expected one weight per line",
                        path.trim(),
                        idx + 1
                    ))
                })?;
                w.push(v);
            }
            ControlSignal::with_weights(horizon, w).map_err(map_core)
        }
    }
}

fn state_rows(z: &StateCoeffs) -> Vec<String> {
    z.coeffs()
        .iter()
        .enumerate()
        .map(|(k, v)| format!("{},{},{}", k + 1, v.re, v.im))
        .collect()
}

fn diff_h3(a: &StateCoeffs, b: &StateCoeffs, lambdas: &[f64]) -> f64 {
    let coeffs = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| x - y)
        .collect();
    hs_norm(&StateCoeffs::new(coeffs), lambdas, 3.0)
}

/// Residual of the moment identity: for each row m, the gap between
/// -i sum_k c_k Q_mk d_mk and the target component y_m, in l2 over m.
fn moment_identity_residual(
    table: &MomentTable,
    ztilde: &StateCoeffs,
    y: &StateCoeffs,
    c: &CouplingMatrix,
) -> f64 {
    let n = c.n();
    let mut sum = 0.0;
    for m in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for (k, ck) in ztilde.coeffs().iter().enumerate() {
            acc += ck * c.q(m, k) * table.entry(m, k);
        }
        let lhs = C64::new(0.0, -1.0) * acc;
        sum += (lhs - y.coeffs()[m]).norm_sqr();
    }
    sum.sqrt()
}

#[derive(Serialize)]
struct ThetaJson {
    weighted_l2: f64,
    l1: f64,
    moment_l2: f64,
    sobolev: f64,
    s_order: f64,
    total: f64,
}

impl ThetaJson {
    fn from_core(t: &qsteer_core::ThetaNorm) -> ThetaJson {
        ThetaJson {
            weighted_l2: t.weighted_l2,
            l1: t.l1,
            moment_l2: t.moment_l2,
            sobolev: t.sobolev,
            s_order: t.s_order,
            total: t.total(),
        }
    }
}

// ---------------------------------------------------------------- commands

#[derive(Serialize)]
struct EigResult {
    n_modes: usize,
    n_grid: usize,
    gauge_shift: f64,
    lambdas: Vec<f64>,
    physical_lambdas: Vec<f64>,
}

fn cmd_eig(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
) -> Result<EigResult, CliError> {
    let v = build_potential(cfg, inputs)?;
    let sys =
        solve_sturm_liouville(&v, cfg.coupling.n_modes, cfg.coupling.n_grid).map_err(map_core)?;
    let n = sys.n_modes();
    let physical = sys.physical_lambdas();
    out.csv(
        "lambdas.csv",
        "k,lambda,physical",
        (0..n).map(|i| format!("{},{},{}", i + 1, sys.lambdas()[i], physical[i])),
    )?;
    let mut header = String::from("x");
    for k in 1..=n {
        header.push_str(&format!(",e{k}"));
    }
    let h = sys.h();
    let n_grid = sys.n_grid();
    let rows = (0..=n_grid).map(|i| {
        let mut row = format!("{}", i as f64 * h);
        for k in 0..n {
            let value = if i == 0 || i == n_grid {
                0.0
            } else {
                sys.mode(k)[i - 1]
            };
            row.push_str(&format!(",{value}"));
        }
        row
    });
    out.csv("modes.csv", &header, rows)?;
    Ok(EigResult {
        n_modes: n,
        n_grid,
        gauge_shift: sys.gauge_shift(),
        lambdas: sys.lambdas().to_vec(),
        physical_lambdas: physical,
    })
}

#[derive(Serialize)]
struct CouplingResult {
    n_modes: usize,
    gauge_shift: f64,
    lambdas: Vec<f64>,
    min_abs_entry: f64,
    max_abs_entry: f64,
}

fn cmd_coupling(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
) -> Result<CouplingResult, CliError> {
    let (_, c) = build_system(cfg, inputs)?;
    let n = c.n();
    let rows = (0..n).flat_map(|m| {
        let c = &c;
        (0..n).map(move |k| format!("{},{},{},{}", m + 1, k + 1, c.q(m, k), c.omega(m, k)))
    });
    out.csv("coupling.csv", "m,k,q,omega", rows)?;
    let mut min_abs = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    for e in c.entries() {
        min_abs = min_abs.min(e.abs());
        max_abs = max_abs.max(e.abs());
    }
    Ok(CouplingResult {
        n_modes: n,
        gauge_shift: c.gauge_shift(),
        lambdas: c.lambdas().to_vec(),
        min_abs_entry: min_abs,
        max_abs_entry: max_abs,
    })
}

#[derive(Serialize)]
struct FloorJson {
    truncation: usize,
    threshold: f64,
    min_weighted_coupling: f64,
    worst_pair: (Vec<usize>, Vec<usize>),
    pass: bool,
}

#[derive(Serialize)]
struct ResonanceJson {
    i: usize,
    j: usize,
    p: usize,
    q: usize,
    mismatch: f64,
}

#[derive(Serialize)]
struct ScanJson {
    truncation: usize,
    gap: f64,
    resonances: Vec<ResonanceJson>,
    pass: bool,
}

#[derive(Serialize)]
struct CheckResult {
    floor: FloorJson,
    resonance: ScanJson,
    pass: bool,
}

fn cmd_check(cfg: &Config, inputs: &mut Vec<InputHash>) -> Result<CheckResult, CliError> {
    let (_, c) = build_system(cfg, inputs)?;
    let floor = check_condition_i(&c, cfg.coupling.floor_threshold);
    let scan = check_condition_ii(c.lambdas(), c.n(), cfg.coupling.resonance_gap);
    let pass = floor.pass && scan.pass;
    Ok(CheckResult {
        floor: FloorJson {
            truncation: floor.truncation,
            threshold: floor.threshold,
            min_weighted_coupling: floor.min_weighted_coupling,
            worst_pair: floor.worst_pair,
            pass: floor.pass,
        },
        resonance: ScanJson {
            truncation: scan.truncation,
            gap: scan.gap,
            resonances: scan
                .resonances
                .iter()
                .map(|r| ResonanceJson {
                    i: r.i,
                    j: r.j,
                    p: r.p,
                    q: r.q,
                    mismatch: r.mismatch,
                })
                .collect(),
            pass: scan.pass,
        },
        pass,
    })
}

#[derive(Serialize)]
struct SimulateResult {
    t_final: f64,
    dt: f64,
    steps: usize,
    recorded: usize,
    l2_drift: f64,
    final_l2: f64,
    final_h3: f64,
}

fn cmd_simulate(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
    rng: &mut ChaCha8Rng,
) -> Result<SimulateResult, CliError> {
    let (_, c) = build_system(cfg, inputs)?;
    let sim = &cfg.simulation;
    let z0 = build_state(&sim.initial, c.n(), &c, rng, inputs)?;
    let u = build_control(cfg, rng, inputs)?;
    let traj = propagate(&z0, &u, &c, sim.t_final, sim.dt, sim.stride).map_err(map_core)?;
    let mut header = String::from("t,l2,h3");
    for k in 1..=c.n() {
        header.push_str(&format!(",p{k}"));
    }
    let rows = traj.times().iter().zip(traj.states()).map(|(t, z)| {
        let mut row = format!("{},{},{}", t, z.l2_norm(), hs_norm(z, c.lambdas(), 3.0));
        for v in z.coeffs() {
            row.push_str(&format!(",{}", v.norm_sqr()));
        }
        row
    });
    out.csv("trajectory.csv", &header, rows)?;
    out.csv("final_state.csv", "k,re,im", state_rows(traj.final_state()))?;
    let zf = traj.final_state();
    Ok(SimulateResult {
        t_final: sim.t_final,
        dt: traj.dt(),
        steps: (sim.t_final / traj.dt()).round() as usize,
        recorded: traj.states().len(),
        l2_drift: traj.l2_drift(),
        final_l2: zf.l2_norm(),
        final_h3: hs_norm(zf, c.lambdas(), 3.0),
    })
}

#[derive(Serialize)]
struct ReturnResult {
    k: u64,
    defect: f64,
    found: bool,
    spectrum: String,
    populated: Vec<usize>,
    order: f64,
    value: f64,
    head_bound: f64,
    tail_bound: f64,
    bound: f64,
}

fn cmd_return_time(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    rng: &mut ChaCha8Rng,
) -> Result<ReturnResult, CliError> {
    let (_, c) = build_system(cfg, inputs)?;
    let sim = &cfg.simulation;
    let z0 = build_state(&sim.initial, c.n(), &c, rng, inputs)?;
    // Weighted norms need positive eigenvalues; fall back to the gauged
    // spectrum when the physical one dips to zero or below.
    let physical = c.physical_lambdas();
    let (lambdas, spectrum) = if physical.iter().all(|l| *l > 0.0) {
        (physical, "physical")
    } else {
        (c.lambdas().to_vec(), "gauged")
    };
    let populated: Vec<usize> = z0
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 1e-8)
        .map(|(j, _)| j + 1)
        .collect();
    let scan_lambdas: Vec<f64> = populated.iter().map(|j| lambdas[j - 1]).collect();
    let rt = find_return_time(&scan_lambdas, sim.return_eps, sim.return_kmax).map_err(map_core)?;
    let rc = verify_return(&z0, &lambdas, rt.k, sim.return_order).map_err(map_core)?;
    Ok(ReturnResult {
        k: rt.k,
        defect: rt.defect,
        found: rt.found,
        spectrum: spectrum.into(),
        populated,
        order: sim.return_order,
        value: rc.value,
        head_bound: rc.head_bound,
        tail_bound: rc.tail_bound,
        bound: rc.bound(),
    })
}

#[derive(Serialize)]
struct LinearizeResult {
    t_final: f64,
    dt: f64,
    final_l2: f64,
    final_h3: f64,
}

fn cmd_linearize(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
    rng: &mut ChaCha8Rng,
) -> Result<LinearizeResult, CliError> {
    let (_, c) = build_system(cfg, inputs)?;
    let sim = &cfg.simulation;
    let ztilde = build_state(&sim.initial, c.n(), &c, rng, inputs)?;
    let u = build_control(cfg, rng, inputs)?;
    let traj = linearized_propagate(&ztilde, &u, &c, sim.t_final, sim.dt).map_err(map_core)?;
    let stride = sim.stride.max(1);
    let last = traj.times().len() - 1;
    let rows = traj
        .times()
        .iter()
        .zip(traj.states())
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, (t, z))| format!("{},{},{}", t, z.l2_norm(), hs_norm(z, c.lambdas(), 3.0)));
    out.csv("linearized.csv", "t,l2,h3", rows)?;
    out.csv("endpoint.csv", "k,re,im", state_rows(traj.final_state()))?;
    let zf = traj.final_state();
    Ok(LinearizeResult {
        t_final: sim.t_final,
        dt: traj.dt(),
        final_l2: zf.l2_norm(),
        final_h3: hs_norm(zf, c.lambdas(), 3.0),
    })
}

#[derive(Serialize)]
struct MomentsResult {
    case: String,
    d0: f64,
    n_modes: usize,
    identity_residual: f64,
    target_l2: f64,
    target_h3: f64,
}

/// Shared front half of `moments` and `synth`: base state, tangent target,
/// moment table, and the moments.csv artifact.
fn build_moments(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
    rng: &mut ChaCha8Rng,
) -> Result<(CouplingMatrix, StateCoeffs, StateCoeffs, MomentTable), CliError> {
    let (_, c) = build_system(cfg, inputs)?;
    let m = &cfg.moments;
    let ztilde = build_state(&m.base, c.n(), &c, rng, inputs)?;
    let y = build_target(&m.target, m.target_scale, &ztilde, &c, rng, inputs)?;
    let table = target_to_moments(&ztilde, &y, &c).map_err(map_core)?;
    let n = table.n();
    let rows = (0..n).flat_map(|row| {
        let table = &table;
        (0..=row).map(move |col| {
            let d = table.entry(row, col);
            format!(
                "{},{},{},{},{}",
                row + 1,
                col + 1,
                table.omega(row, col),
                d.re,
                d.im
            )
        })
    });
    out.csv("moments.csv", "m,k,omega,re,im", rows)?;
    Ok((c, ztilde, y, table))
}

fn cmd_moments(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
    rng: &mut ChaCha8Rng,
) -> Result<MomentsResult, CliError> {
    let (c, ztilde, y, table) = build_moments(cfg, inputs, out, rng)?;
    Ok(MomentsResult {
        case: format!("{:?}", table.case()),
        d0: table.d0(),
        n_modes: table.n(),
        identity_residual: moment_identity_residual(&table, &ztilde, &y, &c),
        target_l2: y.l2_norm(),
        target_h3: hs_norm(&y, c.lambdas(), 3.0),
    })
}

#[derive(Serialize)]
struct SynthResult {
    case: String,
    d0: f64,
    n_targets: usize,
    condition: f64,
    max_residual: f64,
    l2_residual: f64,
    endpoint_gap_h3: f64,
    theta: ThetaJson,
}

fn cmd_synth(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
    rng: &mut ChaCha8Rng,
) -> Result<SynthResult, CliError> {
    let (c, ztilde, y, table) = build_moments(cfg, inputs, out, rng)?;
    let m = &cfg.moments;
    let (u, rep) = synthesize_control(&table, m.t_horizon, m.n_atoms, m.rho).map_err(map_core)?;
    out.csv(
        "weights.csv",
        "atom,weight",
        u.weights()
            .iter()
            .enumerate()
            .map(|(a, w)| format!("{},{}", a + 1, w)),
    )?;
    let omegas: Vec<f64> = core::iter::once(0.0)
        .chain(table.representatives().map(|(_, _, omega, _)| omega))
        .collect();
    out.csv(
        "residuals.csv",
        "omega,residual",
        omegas
            .iter()
            .zip(&rep.residuals)
            .map(|(omega, r)| format!("{omega},{r}")),
    )?;
    out.csv(
        "control.csv",
        "t,u",
        (0..=1000).map(|i| {
            let t = m.t_horizon * i as f64 / 1000.0;
            format!("{},{}", t, u.value(t))
        }),
    )?;
    let endpoint = linearized_endpoint(&ztilde, &u, &c);
    Ok(SynthResult {
        case: format!("{:?}", table.case()),
        d0: table.d0(),
        n_targets: rep.n_targets,
        condition: rep.condition,
        max_residual: rep.max_residual,
        l2_residual: rep.l2_residual,
        endpoint_gap_h3: diff_h3(&endpoint, &y, c.lambdas()),
        theta: ThetaJson::from_core(&rep.theta),
    })
}

#[derive(Serialize)]
struct IterateJson {
    error_h3: f64,
    theta: f64,
    residual: f64,
}

#[derive(Serialize)]
struct SteerResult {
    status: String,
    converged: bool,
    corrections: usize,
    k_return: u64,
    return_found: bool,
    return_defect: f64,
    phase_mismatch_h3: f64,
    initial_error: f64,
    final_error: f64,
    iterates: Vec<IterateJson>,
}

fn cmd_steer(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
    rng: &mut ChaCha8Rng,
) -> Result<SteerResult, CliError> {
    let (_, c) = build_system(cfg, inputs)?;
    let st = &cfg.steering;
    let z0 = build_state(&st.base, c.n(), &c, rng, inputs)?;
    let z1 = match st.target.as_str() {
        "same" => z0.clone(),
        "random" => {
            let dir = build_target("random", 1.0, &z0, &c, rng, inputs)?;
            let h3 = hs_norm(&dir, c.lambdas(), 3.0);
            if h3 <= 0.0 {
                return Err(CliError::Validation(
                    "random tangent direction degenerated to zero".into(),
                ));
            }
            if !(st.target_scale.is_finite() && st.target_scale > 0.0) {
                return Err(CliError::Validation(format!(
                    "target_scale must be positive, got {}",
                    st.target_scale
                )));
            }
            let factor = st.target_scale / h3;
            let coeffs = z0
                .coeffs()
                .iter()
                .zip(dir.coeffs())
                .map(|(z, d)| z + d * factor)
                .collect();
            StateCoeffs::new(coeffs).normalized().map_err(map_core)?
        }
        spec => {
            let path = spec.strip_prefix("file:").ok_or_else(|| {
                CliError::Validation(format!(
                    "bad target spec `{spec}` (expected same, random, or file:path)"
                ))
            })?;
            let state = read_state_file(Path::new(path.trim()), c.n(), inputs)?;
            state.normalized().map_err(map_core)?
        }
    };
    let ncfg = NewtonConfig {
        tol: st.tol,
        max_iter: st.max_iter,
        t_synth: st.t_synth,
        n_atoms: st.n_atoms,
        rho: st.rho,
        dt: st.dt,
        return_eps: st.return_eps,
        k_max: st.k_max,
    };
    let run = newton_control(&z0, &z1, &c, &ncfg).map_err(map_core)?;
    out.csv(
        "iterates.csv",
        "iter,error_h3,theta,residual",
        run.iterates.iter().enumerate().map(|(i, it)| {
            format!("{},{},{},{}", i, it.error_h3, it.theta, it.residual)
        }),
    )?;
    out.csv(
        "weights.csv",
        "atom,weight",
        run.control
            .weights()
            .iter()
            .enumerate()
            .map(|(a, w)| format!("{},{}", a + 1, w)),
    )?;
    let horizon = run.control.horizon();
    out.csv(
        "control.csv",
        "t,u",
        (0..=1000).map(|i| {
            let t = horizon * i as f64 / 1000.0;
            format!("{},{}", t, run.control.value(t))
        }),
    )?;
    let errors = run.errors();
    let status = format!("{:?}", run.status);
    Ok(SteerResult {
        converged: status == "Converged",
        status,
        corrections: run.iterates.len().saturating_sub(1),
        k_return: run.k_return,
        return_found: run.return_found,
        return_defect: run.return_defect,
        phase_mismatch_h3: run.phase_mismatch_h3,
        initial_error: errors.first().copied().unwrap_or(0.0),
        final_error: errors.last().copied().unwrap_or(0.0),
        iterates: run
            .iterates
            .iter()
            .map(|it| IterateJson {
                error_h3: it.error_h3,
                theta: it.theta,
                residual: it.residual,
            })
            .collect(),
    })
}

#[derive(Serialize)]
struct EntropyResult {
    epsilons: Vec<f64>,
    counts_reachable: Vec<usize>,
    counts_ball: Vec<usize>,
    slope_reachable: f64,
    slope_ball: f64,
    slope_gap: f64,
    gap_ci_low: f64,
    holder_plain: f64,
    holder_weighted: f64,
    n_points: usize,
    k_order: f64,
    seed: u64,
}

fn cmd_entropy(
    cfg: &Config,
    inputs: &mut Vec<InputHash>,
    out: &mut OutDir,
    rng: &mut ChaCha8Rng,
) -> Result<EntropyResult, CliError> {
    let (_, c) = build_system(cfg, inputs)?;
    let en = &cfg.entropy;
    let z0 = build_state(&en.initial, c.n(), &c, rng, inputs)?;
    let ecfg = EntropyConfig {
        m: en.m,
        count: en.count,
        knots: en.knots,
        seed: cfg.seed,
        k_order: en.k_order,
        dt: en.dt,
    };
    let rep = entropy_report(&z0, &c, &ecfg).map_err(map_core)?;
    out.csv(
        "covering.csv",
        "epsilon,count_reachable,count_ball",
        rep.epsilons
            .iter()
            .zip(rep.counts_reachable.iter().zip(&rep.counts_ball))
            .map(|(eps, (cr, cb))| format!("{eps},{cr},{cb}")),
    )?;
    Ok(EntropyResult {
        epsilons: rep.epsilons,
        counts_reachable: rep.counts_reachable,
        counts_ball: rep.counts_ball,
        slope_reachable: rep.slope_reachable,
        slope_ball: rep.slope_ball,
        slope_gap: rep.slope_gap,
        gap_ci_low: rep.gap_ci_low,
        holder_plain: rep.holder_plain,
        holder_weighted: rep.holder_weighted,
        n_points: rep.n_points,
        k_order: rep.k_order,
        seed: rep.seed,
    })
}
