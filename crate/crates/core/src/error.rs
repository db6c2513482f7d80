use thiserror::Error;

/// Errors produced by the detection, estimation and spectral routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    SymmetryViolation { asymmetry: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid shrinkage rule: {0}")]
    InvalidRule(String),

    /// The centered window has lower rank than the `(p, n)` shape implies.
    #[error("degenerate window: centered rank {rank}, expected {expected}")]
    DegenerateWindow { rank: usize, expected: usize },

    /// A plug-in covariance estimate cannot be inverted, so the
    /// log-likelihood ratio is undefined.
    #[error("singular covariance estimate ({estimator}, p = {p}, n = {n})")]
    SingularEstimate {
        estimator: String,
        p: usize,
        n: usize,
    },

    #[error(
        "estimation divergence {d_est} is not below the post-change divergence {d_post}; \
         the plug-in drift no longer detects the change"
    )]
    DetectabilityLoss { d_post: f64, d_est: f64 },

    #[error("stream exhausted at t = {t} before crossing or reaching the cap")]
    ExhaustedStream { t: u64 },

    #[error("warm-up needs {needed} samples, stream supplied {got}")]
    InsufficientWarmup { needed: usize, got: usize },

    #[error("run-length summaries cannot be paired: {0}")]
    InvalidPairing(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
