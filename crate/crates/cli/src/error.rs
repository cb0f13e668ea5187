use std::path::Path;

use causticwave::arc1d::ArcError;
use causticwave::caustic::CausticError;
use causticwave::dynamics::DynamicsError;
use causticwave::field2d::FieldError;
use causticwave::oracle::OracleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<StageError>,
    },
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Arc(#[from] ArcError),
    #[error(transparent)]
    Caustic(#[from] CausticError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("no oracle state with dominant quantum numbers {0:?}")]
    NoOracleState((usize, usize)),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn stage(stage: &'static str, e: impl Into<StageError>) -> Self {
        CliError::Stage {
            stage,
            source: Box::new(e.into()),
        }
    }

    /// `2` for a search that did not converge, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        let not_converged = |e: &ArcError| matches!(e, ArcError::NotConverged { .. });
        match self {
            CliError::Stage { source, .. } => match source.as_ref() {
                StageError::Arc(e) if not_converged(e) => 2,
                StageError::Field(FieldError::Arc(e)) if not_converged(e) => 2,
                _ => 1,
            },
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let nc = ArcError::NotConverged {
            reason: "x".into(),
            best_residual: 1.0,
        };
        assert_eq!(CliError::stage("eigensearch", nc).exit_code(), 2);
        assert_eq!(
            CliError::stage("field", FieldError::EmptyOverlap).exit_code(),
            1
        );
        assert_eq!(CliError::Config("bad".into()).exit_code(), 1);
    }
}
