use agentattr_core::evaluation::EvalError;
use agentattr_core::scorer::ScoreError;
use agentattr_core::trajectory::ParseError;
use agentattr_core::AttributionError;
use thiserror::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("scorer failure: {0}")]
    Scorer(String),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("evaluation failure: {0}")]
    Eval(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Scorer(_) => 4,
            CliError::Io(_) => 5,
            CliError::Eval(_) => 6,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        CliError::Scorer(e.to_string())
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<AttributionError> for CliError {
    fn from(e: AttributionError) -> Self {
        match e {
            AttributionError::Score(e) => e.into(),
            AttributionError::Lasso(e) => CliError::Eval(e.to_string()),
            AttributionError::Config(m) => CliError::Usage(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } => CliError::Io(e.to_string()),
            EvalError::Schema { .. } | EvalError::EmptyGroundTruth { .. } | EvalError::DanglingIndex { .. } => {
                CliError::Input(e.to_string())
            }
            EvalError::InvalidK | EvalError::UnknownMethod(_) | EvalError::SynthConfig(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Eval(e.to_string()),
        }
    }
}
