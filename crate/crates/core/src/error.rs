use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// `column` 0 is the intercept, `column` j > 0 is covariate j - 1.
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("quantile regression solver did not converge at u = {u} within {iterations} iterations")]
    SolverFailure { u: f64, iterations: usize },
    #[error("anchor threshold y0 = {y0} is degenerate or not on the grid")]
    Anchor { y0: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("zero denominator in ratio construction at observation {observation}")]
    ZeroDenominator { observation: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{failed} of {total} bootstrap replications failed (budget is 10%)")]
    ReplicationBudget { failed: usize, total: usize },
    #[error("degenerate band: non-finite bootstrap scale")]
    DegenerateBand,
}
