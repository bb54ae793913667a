use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("invalid base sampling: {0}")]
    InvalidBase(String),

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative time t = {0}")]
    NegativeTime(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("existence horizon exceeded near t = {t}: flow Jacobian is singular")]
    HorizonExceeded { t: f64 },

    #[error("iteration did not converge after {iters} steps (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("singular Hessian encountered during minimization")]
    SingularHessian,

    #[error("operation requires a {needed} problem, got a {got} one")]
    WrongProblemKind {
        needed: &'static str,
        got: &'static str,
    },

    #[error("at direction {zeta:?}: {source}")]
    AtDirection {
        zeta: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tags an error with the base direction it occurred at.
    pub fn at_direction(self, zeta: &nalgebra::DVector<f64>) -> Error {
        Error::AtDirection {
            zeta: zeta.iter().copied().collect(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
