use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at row {row} after jitter escalation)")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Carries the last iterate whose gradient was finite.
    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize, last: Vec<f64> },

    #[error("invalid fold count k={k} for n={n}")]
    InvalidFoldCount { n: usize, k: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid DGP spec: {0}")]
    InvalidSpec(String),

    #[error("unknown DGP id `{0}`")]
    UnknownDgp(String),

    #[error("treatment arm {arm} has no observations")]
    EmptyArm { arm: u8 },

    #[error("treatment is degenerate (all units in arm {arm})")]
    DegenerateTreatment { arm: u8 },

    #[error("training complement of fold {fold} lacks treatment arm {arm}")]
    FoldArmCollapse { fold: usize, arm: u8 },

    #[error("pseudo-outcomes have zero sample variance")]
    DegenerateVariance,

    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::UnknownDgp(_)
                | Error::InvalidSpec(_)
                | Error::InvalidFoldCount { .. }
                | Error::Parse { .. }
                | Error::Schema(_)
                | Error::Domain(_)
                | Error::Dimension(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
