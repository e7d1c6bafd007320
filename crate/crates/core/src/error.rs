use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("group {0} has an all-zero valuation row")]
    DegenerateAgent(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("divergence undefined: Q[{0}] = 0 while P[{0}] > 0")]
    DivergenceUndefined(usize),

    #[error("not a probability vector: {0}")]
    NotADistribution(String),

    #[error("item {0} has zero total normalized value; trading-post share undefined")]
    UndefinedShare(usize),

    #[error("unsupported scope: {0}")]
    UnsupportedScope(String),

    #[error("allocation is incomplete: type {item_type} has {allocated} of {copies} copies assigned")]
    IncompleteAllocation {
        item_type: usize,
        allocated: u64,
        copies: u64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("simplex exceeded its iteration guard ({0} pivots) without terminating")]
    CyclingGuard(usize),

    #[error("solution is not basic: {0}")]
    NonBasic(String),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("interval [{0}, {1}] is not inside [0, 1]")]
    IntervalOutOfRange(String, String),

    #[error("requested value {requested} exceeds the remaining mass {available}")]
    InsufficientMass { requested: String, available: String },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
