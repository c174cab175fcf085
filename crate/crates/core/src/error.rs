use thiserror::Error;

/// Errors raised across fitting, inference and testing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("history grid under-resolved: {samples} samples for a {dim}-dimensional Fourier basis (need at least {})", 2 * dim)]
    UnderResolved { samples: usize, dim: usize },

    #[error("degenerate index: coefficient vector is zero")]
    DegenerateIndex,

    #[error("numerical overflow at observation {observation}")]
    Overflow { observation: usize },

    #[error("degenerate degrees of freedom: {0}")]
    DegreesOfFreedom(String),

    #[error("degenerate variance: every grid entry has non-positive variance")]
    DegenerateVariance,

    #[error("test infeasible: {0}")]
    TestInfeasible(String),

    #[error("separation detected in linear logistic fit after {iterations} iterations")]
    Separation { iterations: usize },

    #[error("scenario infeasible: mean {mean} outside the family's range at index value s = {s}")]
    ScenarioInfeasible { s: f64, mean: f64 },

    #[error("no converged fits on the smoothing path")]
    NoConvergedFits,

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
