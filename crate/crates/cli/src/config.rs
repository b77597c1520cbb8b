//! Strict sectioned key/value configuration.
//!
//! Format: `key = value` lines grouped under `[section]` headers; blank
//! lines and lines starting with `#` are ignored. The schema is closed:
//! unknown sections, unknown keys, and duplicate keys are rejected with the
//! offending line number, so a typo can never fall back to a default
//! silently. Parsing yields a fully resolved [`Config`] with every default
//! filled in; the report embeds it verbatim.

use serde::Serialize;

/// Sections the schema knows about. The empty name is the top level.
const SECTIONS: [&str; 6] = [
    "potential",
    "coupling",
    "simulation",
    "moments",
    "steering",
    "entropy",
];

/// Shape names accepted for potentials and coupling profiles.
const SHAPES: [&str; 6] = ["zero", "constant", "linear", "sine", "quadratic", "file"];

/// Potential of the stationary problem.
#[derive(Clone, Debug, Serialize)]
pub struct PotentialCfg {
    pub kind: String,
    pub amplitude: f64,
    pub file: Option<String>,
}

/// Coupling profile and discretization of the spectral stage.
#[derive(Clone, Debug, Serialize)]
pub struct CouplingCfg {
    pub profile: String,
    pub amplitude: f64,
    pub file: Option<String>,
    pub n_modes: usize,
    pub n_grid: usize,
    pub floor_threshold: f64,
    pub resonance_gap: f64,
}

/// Time stepping, initial state, control, and return-time scan knobs.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationCfg {
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
    pub initial: String,
    pub control: String,
    pub control_atoms: usize,
    pub control_scale: f64,
    pub control_horizon: Option<f64>,
    pub return_eps: f64,
    pub return_kmax: u64,
    pub return_order: f64,
}

/// Base state and target for the moment table and its synthesis.
#[derive(Clone, Debug, Serialize)]
pub struct MomentsCfg {
    pub base: String,
    pub target: String,
    pub target_scale: f64,
    pub t_horizon: f64,
    pub n_atoms: usize,
    pub rho: f64,
}

/// Newton steering parameters.
#[derive(Clone, Debug, Serialize)]
pub struct SteeringCfg {
    pub base: String,
    pub target: String,
    pub target_scale: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub t_synth: f64,
    pub n_atoms: usize,
    pub rho: f64,
    pub dt: f64,
    pub return_eps: f64,
    pub k_max: u64,
}

/// Covering-number experiment parameters.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyCfg {
    pub initial: String,
    pub m: f64,
    pub count: usize,
    pub knots: usize,
    pub k_order: f64,
    pub dt: f64,
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug, Serialize)]
pub struct Config {
    pub seed: u64,
    pub potential: PotentialCfg,
    pub coupling: CouplingCfg,
    pub simulation: SimulationCfg,
    pub moments: MomentsCfg,
    pub steering: SteeringCfg,
    pub entropy: EntropyCfg,
}

impl Config {
    fn defaults() -> Config {
        Config {
            seed: 0,
            potential: PotentialCfg {
                kind: "zero".into(),
                amplitude: 1.0,
                file: None,
            },
            coupling: CouplingCfg {
                profile: "linear".into(),
                amplitude: 1.0,
                file: None,
                n_modes: 12,
                n_grid: 1024,
                floor_threshold: 1e-6,
                resonance_gap: 1e-9,
            },
            simulation: SimulationCfg {
                t_final: 10.0,
                dt: 1e-3,
                stride: 100,
                initial: "basis:1".into(),
                control: "none".into(),
                control_atoms: 40,
                control_scale: 0.1,
                control_horizon: None,
                return_eps: 0.05,
                return_kmax: 1_000_000,
                return_order: 3.0,
            },
            moments: MomentsCfg {
                base: "basis:1".into(),
                target: "random".into(),
                target_scale: 0.1,
                t_horizon: 40.0,
                n_atoms: 200,
                rho: 1e-10,
            },
            steering: SteeringCfg {
                base: "basis:1".into(),
                target: "same".into(),
                target_scale: 1e-3,
                tol: 1e-6,
                max_iter: 8,
                t_synth: 40.0,
                n_atoms: 450,
                rho: 1e-10,
                dt: 1e-3,
                return_eps: 0.05,
                k_max: 1_000_000,
            },
            entropy: EntropyCfg {
                initial: "basis:1".into(),
                m: 1.0,
                count: 400,
                knots: 16,
                k_order: 0.5,
                dt: 1e-3,
            },
        }
    }
}

/// One `key = value` occurrence with its source line for error messages.
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn place(section: &str) -> String {
    if section.is_empty() {
        "the top level".into()
    } else {
        format!("[{section}]")
    }
}

fn scan(text: &str) -> Result<Vec<Entry>, String> {
    let mut section = String::new();
    let mut seen: Vec<(String, String)> = Vec::new();
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(inner) = t.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| format!("line {line}: unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(format!("line {line}: unknown section [{name}]"));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| format!("line {line}: expected `key = value`"))?;
        let key = k.trim().to_string();
        let value = v.trim().to_string();
        if key.is_empty() {
            return Err(format!("line {line}: empty key"));
        }
        let slot = (section.clone(), key.clone());
        if seen.contains(&slot) {
            return Err(format!(
                "line {line}: duplicate key `{key}` in {}",
                place(&section)
            ));
        }
        seen.push(slot);
        entries.push(Entry {
            section: section.clone(),
            key,
            value,
            line,
        });
    }
    Ok(entries)
}

fn want_f64(e: &Entry) -> Result<f64, String> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| format!("line {}: `{}` expects a number, got `{}`", e.line, e.key, e.value))?;
    if !v.is_finite() {
        return Err(format!("line {}: `{}` must be finite", e.line, e.key));
    }
    Ok(v)
}

fn want_usize(e: &Entry) -> Result<usize, String> {
    e.value.parse().map_err(|_| {
        format!(
            "line {}: `{}` expects a non-negative integer, got `{}`",
            e.line, e.key, e.value
        )
    })
}

fn want_u64(e: &Entry) -> Result<u64, String> {
    e.value.parse().map_err(|_| {
        format!(
            "line {}: `{}` expects a non-negative integer, got `{}`",
            e.line, e.key, e.value
        )
    })
}

fn want_shape(e: &Entry) -> Result<String, String> {
    if SHAPES.contains(&e.value.as_str()) {
        Ok(e.value.clone())
    } else {
        Err(format!(
            "line {}: `{}` must be one of {}, got `{}`",
            e.line,
            e.key,
            SHAPES.join("|"),
            e.value
        ))
    }
}

/// Parses `text` into a resolved [`Config`], rejecting anything outside the
/// schema.
pub fn parse(text: &str) -> Result<Config, String> {
    let mut cfg = Config::defaults();
    for e in scan(text)? {
        match (e.section.as_str(), e.key.as_str()) {
            ("", "seed") => cfg.seed = want_u64(&e)?,
            ("potential", "kind") => cfg.potential.kind = want_shape(&e)?,
            ("potential", "amplitude") => cfg.potential.amplitude = want_f64(&e)?,
            ("potential", "file") => cfg.potential.file = Some(e.value.clone()),
            ("coupling", "profile") => cfg.coupling.profile = want_shape(&e)?,
            ("coupling", "amplitude") => cfg.coupling.amplitude = want_f64(&e)?,
            ("coupling", "file") => cfg.coupling.file = Some(e.value.clone()),
            ("coupling", "n_modes") => cfg.coupling.n_modes = want_usize(&e)?,
            ("coupling", "n_grid") => cfg.coupling.n_grid = want_usize(&e)?,
            ("coupling", "floor_threshold") => cfg.coupling.floor_threshold = want_f64(&e)?,
            ("coupling", "resonance_gap") => cfg.coupling.resonance_gap = want_f64(&e)?,
            ("simulation", "t_final") => cfg.simulation.t_final = want_f64(&e)?,
            ("simulation", "dt") => cfg.simulation.dt = want_f64(&e)?,
            ("simulation", "stride") => cfg.simulation.stride = want_usize(&e)?,
            ("simulation", "initial") => cfg.simulation.initial = e.value.clone(),
            ("simulation", "control") => cfg.simulation.control = e.value.clone(),
            ("simulation", "control_atoms") => cfg.simulation.control_atoms = want_usize(&e)?,
            ("simulation", "control_scale") => cfg.simulation.control_scale = want_f64(&e)?,
            ("simulation", "control_horizon") => {
                cfg.simulation.control_horizon = Some(want_f64(&e)?)
            }
            ("simulation", "return_eps") => cfg.simulation.return_eps = want_f64(&e)?,
            ("simulation", "return_kmax") => cfg.simulation.return_kmax = want_u64(&e)?,
            ("simulation", "return_order") => cfg.simulation.return_order = want_f64(&e)?,
            ("moments", "base") => cfg.moments.base = e.value.clone(),
            ("moments", "target") => cfg.moments.target = e.value.clone(),
            ("moments", "target_scale") => cfg.moments.target_scale = want_f64(&e)?,
            ("moments", "t_horizon") => cfg.moments.t_horizon = want_f64(&e)?,
            ("moments", "n_atoms") => cfg.moments.n_atoms = want_usize(&e)?,
            ("moments", "rho") => cfg.moments.rho = want_f64(&e)?,
            ("steering", "base") => cfg.steering.base = e.value.clone(),
            ("steering", "target") => cfg.steering.target = e.value.clone(),
            ("steering", "target_scale") => cfg.steering.target_scale = want_f64(&e)?,
            ("steering", "tol") => cfg.steering.tol = want_f64(&e)?,
            ("steering", "max_iter") => cfg.steering.max_iter = want_usize(&e)?,
            ("steering", "t_synth") => cfg.steering.t_synth = want_f64(&e)?,
            ("steering", "n_atoms") => cfg.steering.n_atoms = want_usize(&e)?,
            ("steering", "rho") => cfg.steering.rho = want_f64(&e)?,
            ("steering", "dt") => cfg.steering.dt = want_f64(&e)?,
            ("steering", "return_eps") => cfg.steering.return_eps = want_f64(&e)?,
            ("steering", "k_max") => cfg.steering.k_max = want_u64(&e)?,
            ("entropy", "initial") => cfg.entropy.initial = e.value.clone(),
            ("entropy", "m") => cfg.entropy.m = want_f64(&e)?,
            ("entropy", "count") => cfg.entropy.count = want_usize(&e)?,
            ("entropy", "knots") => cfg.entropy.knots = want_usize(&e)?,
            ("entropy", "k_order") => cfg.entropy.k_order = want_f64(&e)?,
            ("entropy", "dt") => cfg.entropy.dt = want_f64(&e)?,
            _ => {
                return Err(format!(
                    "line {}: unknown key `{}` in {}",
                    e.line,
                    e.key,
                    place(&e.section)
                ))
            }
        }
    }
    Ok(cfg)
}
