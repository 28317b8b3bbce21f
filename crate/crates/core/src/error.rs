use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("rate matrix must be square with at least 2 states, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },

    #[error("state labels: {0}")]
    Labels(String),

    #[error("negative off-diagonal rate {value} at ({row}, {col})")]
    NegativeRate { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected 0")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("state {state} has zero exit rate (absorbing states are unsupported)")]
    ZeroExitRate { state: usize },

    #[error("stationary system is singular (chain appears reducible)")]
    SingularSystem,

    #[error("rate matrix is not real-diagonalizable: {0}")]
    ComplexSpectrum(String),

    #[error("detailed balance violated at ({i}, {j}): {lhs} vs {rhs}")]
    DetailedBalanceViolation { i: usize, j: usize, lhs: f64, rhs: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("observation times must be strictly increasing and start at 0")]
    NonMonotoneTimes,

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("invalid endpoint problem: {0}")]
    InvalidProblem(String),

    #[error("rejection sampler exceeded {attempts} attempts without acceptance")]
    RejectionBudgetExceeded { attempts: u64 },

    #[error("endpoint {b} unreachable from {a} in time {horizon:?} (P = {probability:e})")]
    UnreachableEndpoint { a: usize, b: usize, horizon: f64, probability: f64 },

    #[error("root finder failed: {0}")]
    RootFindFailure(String),

    #[error("uniformization series did not reach the target mass by n = {cap}")]
    SeriesTruncation { cap: usize },

    #[error("insufficient variation for regression: {0}")]
    InsufficientVariation(String),

    #[error("invalid frequency vector: {0}")]
    InvalidFrequencyVector(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}
