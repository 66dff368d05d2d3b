use thiserror::Error;

use crate::integrator::State;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown problem family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter for `{family}`: {constraint}")]
    InvalidParameter { family: String, constraint: String },

    #[error("no reference minimum available for problem `{0}`")]
    NoReferenceMinimum(String),

    #[error("problem `{0}` has an empty or unknown argmin; anchored quantities need a minimizer")]
    EmptyArgmin(String),

    #[error("objective value {value} lies below the reference minimum {reference}")]
    BelowReference { value: f64, reference: f64 },

    #[error("objective is +inf at the given point (outside the domain of the nonsmooth term)")]
    InfiniteValue,

    #[error("continuous-time dynamics need a smooth problem; `{0}` has a nonsmooth term")]
    NonsmoothDynamics(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("integration exceeded {max_steps} steps at t = {}", last.t)]
    MaxStepsExceeded { max_steps: usize, last: Box<State> },

    #[error("step size underflow at t = {}", last.t)]
    StepSizeUnderflow { last: Box<State> },

    #[error("non-finite state produced after t = {}", last.t)]
    NonFiniteState { last: Box<State> },

    #[error("iteration diverged (non-finite values) at k = {k}")]
    Diverged { k: u64, last_finite: Vec<f64> },

    #[error("rate fit needs at least {needed} positive points in the window, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("series is identically zero: converged, rate undefined")]
    ConvergedRateUndefined,

    #[error("fixed-step budget exceeded: horizon {horizon} is too long for the reference integrator")]
    BudgetExceeded { horizon: f64 },
}
