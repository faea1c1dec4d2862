use thiserror::Error;

/// Errors raised by the change-point toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SncpError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate window [{start}, {end}] for polynomial order {order}")]
    DegenerateWindow { start: usize, end: usize, order: usize },

    #[error("empty self-normalizer range at candidate k={k} in [{start}, {end}]")]
    InfeasibleCandidate { start: usize, k: usize, end: usize },

    #[error("singular self-normalizer at candidate k={k}")]
    SingularNormalizer { k: usize },

    #[error("interval [{start}, {end}] shorter than 2h = {min_len}")]
    IntervalTooShort { start: usize, end: usize, min_len: usize },

    #[error("no feasible candidate in interval [{start}, {end}]")]
    NoCandidate { start: usize, end: usize },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("replay differs from the recorded run: {0}")]
    ReplayMismatch(String),
}

impl SncpError {
    pub fn argument(msg: impl Into<String>) -> Self {
        Self::Argument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Argument(_) | Self::Config(_) => 3,
            Self::DegenerateWindow { .. }
            | Self::InfeasibleCandidate { .. }
            | Self::SingularNormalizer { .. }
            | Self::IntervalTooShort { .. }
            | Self::NoCandidate { .. } => 4,
            Self::NotFound(_) => 5,
            Self::Io(_) => 6,
            Self::Parse(_) => 7,
            Self::ReplayMismatch(_) => 8,
        }
    }
}

impl From<std::io::Error> for SncpError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for SncpError {
    fn from(e: csv::Error) -> Self {
        Self::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for SncpError {
    fn from(e: serde_json::Error) -> Self {
        Self::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SncpError>;
