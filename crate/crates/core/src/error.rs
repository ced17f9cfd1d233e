use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {name} = {value} ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("NoFailures: each component needs at least one observed failure (r1 = {r1}, r2 = {r2})")]
    NoFailures { r1: usize, r2: usize },

    #[error("NonConvergence: no stationary point after {iterations} iterations (gradient norm {gradient_norm:e}); best point {best:?}")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        best: [f64; 3],
    },

    #[error("SingularInformation: observed information matrix is not invertible")]
    SingularInformation,

    #[error("ImproperPosterior: {0}")]
    ImproperPosterior(String),

    #[error("GelfDomainError: {0}")]
    GelfDomain(String),

    #[error("InvalidLoss: {0}")]
    InvalidLoss(String),

    #[error("ImproperProposal: {0}")]
    ImproperProposal(String),

    #[error("DegenerateWeights: importance weights collapsed (sum/max = {ratio:.4})")]
    DegenerateWeights { ratio: f64 },

    #[error("bracket expansion failed: predictive CDF reached only {reached:e} at y = {upper:e} while targeting {target}")]
    BracketFailure { target: f64, upper: f64, reached: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain { name, value, reason }
    }

    /// Stable variant name, used to tally failures.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "Domain",
            Error::InvalidSample(_) => "InvalidSample",
            Error::NoFailures { .. } => "NoFailures",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::SingularInformation => "SingularInformation",
            Error::ImproperPosterior(_) => "ImproperPosterior",
            Error::GelfDomain(_) => "GelfDomainError",
            Error::InvalidLoss(_) => "InvalidLoss",
            Error::ImproperProposal(_) => "ImproperProposal",
            Error::DegenerateWeights { .. } => "DegenerateWeights",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
