use std::fmt;

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Convergence(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Convergence(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Convergence(m) => write!(f, "convergence error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<wfgl::Error> for CliError {
    fn from(e: wfgl::Error) -> Self {
        use wfgl::Error as E;
        let msg = match &e {
            E::InvalidConfig(m) => m.clone(),
            _ => e.to_string(),
        };
        match e {
            E::InvalidConfig(_) | E::NoRoot { .. } | E::InfeasibleCross(_) => CliError::Config(msg),
            E::ZeroVarianceColumn(_)
            | E::NonPositiveDiagonal(_)
            | E::DimensionMismatch(_)
            | E::NonPositiveWeight(..)
            | E::ZeroResidualVariance(_)
            | E::EmptyInput
            | E::SampleTooSmall(_)
            | E::SingularSubmatrix(_)
            | E::Io(_)
            | E::Parse(_) => CliError::Data(msg),
            E::EigenDecompositionFailure | E::CholeskyFailure | E::MatchFailure | E::EmptyGroup(_) => {
                CliError::Internal(msg)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
