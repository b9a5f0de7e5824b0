use num_complex::Complex64;

/// Errors raised by the analysis, design and simulation layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("covariance matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("transform returned a non-finite value at s = {s}")]
    NonFiniteTransform { s: Complex64 },

    #[error("rate split is infeasible: beta_near^2 * (2^R_far - 1) = {value} >= 1")]
    InfeasibleRateSplit { value: f64 },

    #[error("every one of the {candidates} antenna selections yields a singular effective channel")]
    AllCandidatesSingular { candidates: usize },

    #[error("no rate pair satisfies the outage constraint {epsilon}")]
    NoFeasibleRates { epsilon: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(name, reason))
    }
}
