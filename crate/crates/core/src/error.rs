use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid model specification: {0}")]
    InvalidModel(String),

    #[error("design matrix is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },

    #[error("outcome is constant across all rows; the logistic intercept diverges")]
    DegenerateOutcome,

    #[error("IRLS did not converge within {iterations} iterations")]
    NonConverged { iterations: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("treatment arm {arm} has no observations")]
    EmptyArm { arm: u8 },

    #[error("{failed} of {total} leave-one-out refits failed (first failing row {first})")]
    LooFailure {
        failed: usize,
        total: usize,
        first: usize,
    },

    #[error("{failed} of {total} bootstrap resamples failed to fit")]
    BootstrapDegenerate { failed: usize, total: usize },

    #[error("no replicate survived exclusion")]
    NoIncludedReplicates,

    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("column `{column}` must be 0/1 but row {row} holds {value}")]
    NonBinaryColumn {
        column: String,
        row: usize,
        value: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag, used in exclusion reasons and CLI exit output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidModel(_) => "invalid_model",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::DegenerateOutcome => "degenerate_outcome",
            Error::NonConverged { .. } => "nonconvergence",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyArm { .. } => "empty_arm",
            Error::LooFailure { .. } => "loo_failure",
            Error::BootstrapDegenerate { .. } => "bootstrap_degenerate",
            Error::NoIncludedReplicates => "no_included_replicates",
            Error::Config { .. } => "config",
            Error::FileNotFound(_) => "file_not_found",
            Error::Parse { .. } => "parse",
            Error::NonBinaryColumn { .. } => "non_binary_column",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
