use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid busy-time distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("leakage diverges: {0}")]
    DivergentLeakage(String),

    #[error("penalty expectation diverges: {0}")]
    DivergentPenalty(String),

    #[error("leakage budget {delta} is infeasible (leakage never drops below {floor})")]
    InfeasibleBudget { delta: f64, floor: f64 },

    #[error("erasure probability must be below 1 (the channel never delivers)")]
    DegenerateChannel,

    #[error("no closed form available: {0}")]
    UnsupportedClosedForm(String),

    #[error("root bracketing failed: {0}")]
    BracketFailure(String),

    #[error("overflow guard tripped: {0}")]
    Overflow(String),

    #[error("timing constraint violated: {0}")]
    ConstraintViolation(String),
}
