//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Failure modes of the numeric routines.
///
/// Validation failures (bad shapes, non-finite data, out-of-range knobs) are
/// distinguished from genuine numerical outcomes (obstructed moment problems,
/// ill-conditioned synthesis, diverging Newton runs) so callers can map them
/// to different exit paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid too coarse for the requested mode count (needs n_grid >= 8 * n_modes).
    ResolutionGuard { n_grid: usize, n_modes: usize },
    /// A sample or parameter is NaN or infinite.
    NonFinite(&'static str),
    /// Input violates a documented precondition.
    Invalid(String),
    /// Two-mode state with vanishing obstruction functional: the moment
    /// problem for this tangent direction is singular.
    ObstructedState { defect: f64 },
    /// Regularized Gram matrix condition number exceeded the guard, or the
    /// unregularized normal equations lost positive definiteness.
    IllConditioned { cond: f64 },
    /// Newton steering error failed to decrease for three consecutive iterations.
    Diverged { at_iter: usize, error: f64 },
    /// Tangent vector lies outside the sphere chart of radius delta.
    OutOfChart { norm: f64, delta: f64 },
    /// A coupling entry needed as a divisor is numerically zero.
    DegenerateCoupling { m: usize, k: usize, value: f64 },
    /// Two moment constraints target (numerically) the same frequency.
    ResonantFrequencies { omega: f64 },
    /// The degenerate three-mode closure has no solvable scalar equation.
    ClosureContradiction,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ResolutionGuard { n_grid, n_modes } => write!(
                f,
                "resolution guard: n_grid = {n_grid} cannot resolve n_modes = {n_modes} (need n_grid >= 8 * n_modes)"
            ),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::ObstructedState { defect } => write!(
                f,
                "obstructed state: two-mode obstruction functional is {defect:.3e}; the moment problem is singular"
            ),
            Error::IllConditioned { cond } => {
                write!(f, "ill-conditioned synthesis: Gram condition number {cond:.3e}")
            }
            Error::Diverged { at_iter, error } => write!(
                f,
                "steering diverged: error {error:.3e} non-decreasing through iteration {at_iter}"
            ),
            Error::OutOfChart { norm, delta } => write!(
                f,
                "tangent norm {norm:.3e} outside the chart radius {delta:.3e}"
            ),
            Error::DegenerateCoupling { m, k, value } => write!(
                f,
                "coupling entry ({m},{k}) = {value:.3e} is too small to divide by"
            ),
            Error::ResonantFrequencies { omega } => write!(
                f,
                "moment frequencies collide near omega = {omega:.6e}"
            ),
            Error::ClosureContradiction => {
                write!(f, "degenerate closure: scalar equation for the common diagonal is unsolvable")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
