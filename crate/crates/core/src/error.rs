use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed valuation: {0}")]
    MalformedValuation(String),

    #[error("capacity exceeded: {what} is {actual}, cap is {cap}")]
    Capacity {
        what: &'static str,
        actual: u128,
        cap: u128,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible fractional solution: {0}")]
    InfeasibleSolution(String),

    /// Step-6 keep probability `p / (1 - q_i)` exceeds one.
    #[error(
        "keep probability p/(1-q) exceeds 1 for bidder {bidder}: q = {q}, p = {p} \
         (the mechanism requires q <= 1 - p; the large-m analysis guarantees q <= 1/m <= p)"
    )]
    KeepProbability { bidder: usize, q: String, p: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("solver did not converge: {0}")]
    Diagnostics(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn capacity(what: &'static str, actual: impl Into<u128>, cap: impl Into<u128>) -> Self {
        Error::Capacity {
            what,
            actual: actual.into(),
            cap: cap.into(),
        }
    }
}
