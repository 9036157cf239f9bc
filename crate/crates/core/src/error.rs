use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid normalizer: hi ({hi}) must be strictly greater than lo ({lo})")]
    InvalidNormalizer { lo: f64, hi: f64 },

    #[error("day {dap} is outside the {season_days}-day season")]
    OutOfSeason { dap: i64, season_days: u32 },

    #[error(
        "crop schedule mismatch: stages sum to {stage_total} days but season is {season_days} days"
    )]
    ScheduleMismatch { stage_total: u32, season_days: u32 },

    #[error("invalid crop schedule: {0}")]
    InvalidSchedule(String),

    #[error("insufficient history: {available} observations, lag {lag} needs at least {}", lag + 1)]
    InsufficientHistory { available: usize, lag: usize },

    #[error("records out of order at row {row}: {detail}")]
    Ordering { row: usize, detail: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("unsupported model format version `{0}`")]
    Version(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI, one per error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Dimension { .. } => 3,
            Error::InvalidNormalizer { .. } => 4,
            Error::OutOfSeason { .. }
            | Error::ScheduleMismatch { .. }
            | Error::InvalidSchedule(_) => 5,
            Error::InsufficientHistory { .. } => 6,
            Error::Ordering { .. } => 7,
            Error::UndefinedMetric(_) => 8,
            Error::Parse { .. } | Error::Csv(_) => 9,
            Error::Version(_) => 10,
            Error::Config(_) => 11,
            Error::Io { .. } => 12,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
