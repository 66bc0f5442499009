use cfdist_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidArgument(_)
            | CoreError::Anchor { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::GridMismatch(_) => CliError::Config(msg),
            CoreError::Schema(_) | CoreError::Validation(_) | CoreError::Domain(_) | CoreError::Degenerate(_) => {
                CliError::Data(msg)
            }
            CoreError::RankDeficient { .. }
            | CoreError::SolverFailure { .. }
            | CoreError::ZeroDenominator { .. }
            | CoreError::ReplicationBudget { .. }
            | CoreError::DegenerateBand => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
