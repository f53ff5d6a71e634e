use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("spectral split failed: {0}")]
    Split(String),

    #[error("classification mismatch: {0}")]
    Classification(String),

    #[error("degenerate shift: {0}")]
    Degenerate(String),

    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    #[error("compatibility condition violated: {0}")]
    Compatibility(String),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Dimension(_) => "dimension",
            Error::InvalidModel(_) => "invalid_model",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Singular(_) => "singular",
            Error::Split(_) => "split",
            Error::Classification(_) => "classification",
            Error::Degenerate(_) => "degenerate",
            Error::Infeasible(_) => "infeasible",
            Error::Compatibility(_) => "compatibility",
        }
    }

    /// Process exit code: 1 validation, 2 numerical failure, 3 infeasible constraint.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Dimension(_) | Error::InvalidModel(_) => 1,
            Error::Infeasible(_) | Error::Compatibility(_) => 3,
            _ => 2,
        }
    }
}
