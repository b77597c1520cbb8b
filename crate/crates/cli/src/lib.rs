//! Command dispatch for the `qsteer` binary.
//!
//! Every subcommand follows the same shape: read one configuration file,
//! resolve it against a strict schema, run the experiment, and write a
//! `report.json` plus CSV artifacts into the output directory. All
//! randomness flows from the single resolved seed, so a rerun of the same
//! config produces byte-identical outputs.
//!
//! Exit codes: 0 on success, 2 for usage or validation problems (bad flags,
//! malformed config, unreadable inputs), 3 when the computation itself fails
//! or refuses (divergence, ill-conditioning, obstructed states).

mod commands;
mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Failure modes of a run, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Configuration or input problem; exit code 2.
    Validation(String),
    /// The computation failed or refused; exit code 3.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

/// Maps a core error onto an exit class: precondition violations are
/// validation problems, everything else is a numerical outcome.
pub(crate) fn map_core(e: qsteer_core::Error) -> CliError {
    use qsteer_core::Error as E;
    match e {
        E::Invalid(_) | E::NonFinite(_) | E::ResolutionGuard { .. } => {
            CliError::Validation(e.to_string())
        }
        _ => CliError::Numerical(e.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "qsteer",
    version,
    about = "Config-driven experiments on a bilinear Schrodinger control model"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Eigenvalues and mode shapes of the configured potential.
    Eig(RunArgs),
    /// Coupling matrix of the configured profile in the eigenbasis.
    Coupling(RunArgs),
    /// Coupling-floor and frequency-distinctness condition report.
    Check(RunArgs),
    /// Propagate the configured state under the configured control.
    Simulate(RunArgs),
    /// Scan for an approximate free-flow return time and verify its bound.
    ReturnTime(RunArgs),
    /// First-order variation driven by the configured control.
    Linearize(RunArgs),
    /// Moment table of a tangent target at the configured base state.
    Moments(RunArgs),
    /// Fit a control atom bank to the moment table.
    Synth(RunArgs),
    /// Newton steering from the base state toward the configured target.
    Steer(RunArgs),
    /// Covering-number comparison of reachable and ball clouds.
    Entropy(RunArgs),
}

/// Flags shared by every subcommand: one config file per experiment, an
/// output directory, and an optional seed override.
#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Directory receiving report.json and CSV artifacts.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override the seed from the config file.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

/// Parses `argv` and runs the selected command, returning the process exit
/// code. Help and version requests exit 0; usage errors exit 2.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, args) = match &cli.command {
        Cmd::Eig(a) => ("eig", a),
        Cmd::Coupling(a) => ("coupling", a),
        Cmd::Check(a) => ("check", a),
        Cmd::Simulate(a) => ("simulate", a),
        Cmd::ReturnTime(a) => ("return-time", a),
        Cmd::Linearize(a) => ("linearize", a),
        Cmd::Moments(a) => ("moments", a),
        Cmd::Synth(a) => ("synth", a),
        Cmd::Steer(a) => ("steer", a),
        Cmd::Entropy(a) => ("entropy", a),
    };
    match commands::dispatch(name, args) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}
