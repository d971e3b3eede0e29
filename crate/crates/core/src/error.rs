use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("particle belief is degenerate: every weight is zero")]
    DegenerateBelief,

    #[error("invalid track interval: appear={appear}, last={last}, path spans {first}..={end}, horizon {horizon}")]
    InvalidInterval {
        appear: usize,
        last: usize,
        first: usize,
        end: usize,
        horizon: usize,
    },

    #[error("invalid association: {0}")]
    InvalidAssociation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than bad invocation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::InvalidAssociation(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
