use std::fmt;

/// CLI failure classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// Unreadable or malformed input data (exit 3).
    Data(String),
    /// Numerical failure inside the library (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hdqcd::Error> for CliError {
    fn from(e: hdqcd::Error) -> Self {
        use hdqcd::Error as E;
        match e {
            E::InvalidInput(_)
            | E::DimensionMismatch { .. }
            | E::ExhaustedStream { .. }
            | E::InsufficientWarmup { .. }
            | E::InvalidPairing(_) => Self::Data(e.to_string()),
            E::SymmetryViolation { .. }
            | E::NotPositiveDefinite
            | E::Domain(_)
            | E::InvalidRule(_)
            | E::DegenerateWindow { .. }
            | E::SingularEstimate { .. }
            | E::DetectabilityLoss { .. } => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
