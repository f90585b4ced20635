use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised anywhere in the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("county {county} has no baseline death-rate entry")]
    MissingBaseline { county: String },
    #[error("no death rate for county {county} in {year}")]
    Lookup { county: String, year: i32 },
    #[error("degenerate threshold: {0}")]
    DegenerateThreshold(String),
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("fixed-effect absorption did not converge after {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("collinear regressors: {}", .dependent.join(", "))]
    Collinearity { dependent: Vec<String> },
    #[error("inference error: {0}")]
    Inference(String),
    #[error("specification error: {0}")]
    Spec(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("support too large: {points} points exceeds cap of {cap}")]
    SupportTooLarge { points: u128, cap: u128 },
    #[error("monte carlo aborted: {failures} of {replications} replications failed")]
    MonteCarloAborted { failures: usize, replications: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable tag used in error sidecar files.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Row { .. } => "row",
            Error::Integrity(_) => "integrity",
            Error::MissingBaseline { .. } => "missing_baseline",
            Error::Lookup { .. } => "lookup",
            Error::DegenerateThreshold(_) => "degenerate_threshold",
            Error::DegenerateDenominator(_) => "degenerate_denominator",
            Error::Config { .. } => "config",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Collinearity { .. } => "collinearity",
            Error::Inference(_) => "inference",
            Error::Spec(_) => "specification",
            Error::Undefined(_) => "undefined",
            Error::SupportTooLarge { .. } => "support_too_large",
            Error::MonteCarloAborted { .. } => "monte_carlo_aborted",
        }
    }
}
