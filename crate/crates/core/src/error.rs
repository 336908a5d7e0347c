use alloc::string::String;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("Ulam iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("invariant density has not been built for this model")]
    MissingDensity,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("observable overflowed while sampling; largest finite level {max_finite:e}")]
    Overflow { max_finite: f64 },
    #[error("insufficient runs: need at least {needed}, got {got}")]
    InsufficientRuns { needed: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::Error::Domain(alloc::format!($($arg)*)) };
}
macro_rules! precondition {
    ($($arg:tt)*) => { $crate::Error::Precondition(alloc::format!($($arg)*)) };
}
pub(crate) use domain;
pub(crate) use precondition;
