use thiserror::Error;

/// Coarse failure classes, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad parameters or malformed input.
    Config,
    /// A numerical solver failed to converge or left its admissible domain.
    Solver,
    /// Random instance generation failed.
    Generation,
    /// Filesystem or serialization trouble.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate degree distribution: mean degree is zero")]
    DegenerateDistribution,

    #[error("spike density must be centred, got mean {mean}")]
    UncenteredSpike { mean: f64 },

    #[error("degree parity cannot be repaired: every supported degree is {parity} and N = {n}")]
    ParityUnrepairable { parity: &'static str, n: usize },

    #[error("infeasible degree sequence: {0}")]
    InfeasibleSequence(String),

    #[error("no simple graph found after {restarts} restarts")]
    RestartBudgetExhausted { restarts: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("eigensolver residual stagnated at {residual:.3e} after {iterations} iterations (degenerate top eigenvalue?)")]
    Stagnated { iterations: usize, residual: f64 },

    #[error("dense path limited to N <= {cap}, got N = {n}")]
    CapExceeded { n: usize, cap: usize },

    #[error("non-positive cavity precision {omega:.6e} at lambda = {lambda}")]
    NonPositiveOmega { omega: f64, lambda: f64 },

    #[error("bias fields diverged at lambda = {lambda} (lambda below the structural eigenvalue?)")]
    FieldsDiverged { lambda: f64 },

    #[error("non-positive denominator {value:.6e} in cavity estimator")]
    NonPositiveDenominator { value: f64 },

    #[error("population did not plateau within {sweeps} sweeps")]
    MaxSweepsExceeded { sweeps: usize },

    #[error("alpha rescaling did not converge within {rescales} rescales (alpha1 = {alpha1}, alpha2 = {alpha2})")]
    MaxRescalesExceeded {
        rescales: usize,
        alpha1: f64,
        alpha2: f64,
    },

    #[error("fixed point for m did not converge at lambda = {lambda}")]
    NoConvergence { lambda: f64 },

    #[error("negative denominator in the m fixed point at lambda = {lambda}")]
    NegativeDenominator { lambda: f64 },

    #[error("no root of Q(lambda) = {target} above the admissible edge {edge}")]
    RootNotBracketed { target: f64, edge: f64 },

    #[error("implicit derivative {implicit:.12e} disagrees with finite difference {finite:.12e}")]
    DerivativeMismatch { implicit: f64, finite: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidParameter(_) | DegenerateDistribution | UncenteredSpike { .. } | Parse { .. } => {
                ErrorClass::Config
            }
            ParityUnrepairable { .. } | InfeasibleSequence(_) | RestartBudgetExhausted { .. } => {
                ErrorClass::Generation
            }
            Io(_) => ErrorClass::Io,
            _ => ErrorClass::Solver,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
