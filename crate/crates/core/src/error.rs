use alloc::string::String;
use alloc::vec::Vec;

use crate::game::Violation;
use crate::linalg::Matrix;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error(
        "normalization root did not converge in {iterations} iterations (residual {residual:e})"
    )]
    BisectionNoConvergence { iterations: usize, residual: f64 },
    #[error("simplex exceeded its pivot budget of {pivots} on a {}x{} matrix game", matrix.rows(), matrix.cols())]
    LpFailure { pivots: usize, matrix: Matrix },
    #[error("{what} hit the iteration cap {cap} (residual {residual:e})")]
    IterationCap {
        what: &'static str,
        cap: usize,
        residual: f64,
    },
    #[error("singular linear system in {0}")]
    Singular(&'static str),
    #[error("chain is reducible: {0}")]
    Reducible(&'static str),
    #[error("game generation failed for seed {seed} after {attempts} attempts")]
    GenerationFailed { seed: u64, attempts: usize },
    #[error("game failed validation with {} violation(s)", .0.len())]
    InvalidGame(Vec<Violation>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "benchmark policy does not induce an irreducible aperiodic chain (r_b saturated at {0})"
    )]
    Assumption3Infeasible(usize),
    #[error("schedule rejected in theory-strict mode: {0}")]
    TheoryStrict(String),
    #[error("runtime invariant violated: {0}")]
    InvariantViolated(String),
}

/// Result alias for the crate.
pub type Result<T> = core::result::Result<T, Error>;
