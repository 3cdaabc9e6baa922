use thiserror::Error;

use gptlab::GptError;

use crate::expr::ParseError;
use crate::gptfile::GptFileError;

/// Failure of a CLI run, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Expression(#[from] ParseError),
    #[error(transparent)]
    GptFile(#[from] GptFileError),
    #[error("{0}")]
    Solver(GptError),
    #[error("{0}")]
    Inadmissible(GptError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl From<GptError> for CliError {
    fn from(e: GptError) -> Self {
        match e {
            GptError::InadmissibleConductivity(_) | GptError::InadmissibleTarget(_) => {
                Self::Inadmissible(e)
            }
            GptError::InvalidArgument(m) => Self::Usage(m),
            _ => Self::Solver(e),
        }
    }
}

impl CliError {
    pub const USAGE: i32 = 1;
    pub const SOLVER: i32 = 2;
    pub const INADMISSIBLE: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Expression(_) | Self::GptFile(_) | Self::Csv(_) => Self::USAGE,
            Self::Io { .. } => Self::USAGE,
            Self::Solver(_) => Self::SOLVER,
            Self::Inadmissible(_) => Self::INADMISSIBLE,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let code = |e: GptError| CliError::from(e).exit_code();
        assert_eq!(code(GptError::InvalidArgument("x".into())), CliError::USAGE);
        assert_eq!(
            code(GptError::InadmissibleTarget("x".into())),
            CliError::INADMISSIBLE
        );
        assert_eq!(
            code(GptError::InadmissibleConductivity("x".into())),
            CliError::INADMISSIBLE
        );
        assert_eq!(
            code(GptError::ModeSolve {
                mode: 3,
                residual: 1.0
            }),
            CliError::SOLVER
        );
        assert_eq!(code(GptError::SingularSystem("x".into())), CliError::SOLVER);
        assert_eq!(
            code(GptError::Diverged {
                iteration: 4,
                residual: 1.0
            }),
            CliError::SOLVER
        );
    }
}
