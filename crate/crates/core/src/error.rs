use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{what} out of domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("SVD did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("matrix is numerically singular (sigma_min = {sigma_min:e})")]
    Singular { sigma_min: f64 },

    #[error("integrand not finite at node {index} (abscissa {abscissa})")]
    Evaluation { index: usize, abscissa: f64 },

    #[error("sparse generator could not reach kappa band [{lo}, {hi}] in {attempts} attempts; kappa histogram: {histogram}")]
    BandInfeasible {
        lo: f64,
        hi: f64,
        attempts: usize,
        histogram: String,
    },

    #[error("spectral gap violated: singular value {sigma:e} lies inside ({threshold:e}, {floor:e})")]
    GapViolation { sigma: f64, threshold: f64, floor: f64 },

    #[error("success probability {p_succ:e} is degenerate")]
    DegenerateSuccess { p_succ: f64 },

    #[error("input has no overlap with the kernel (infidelity {mu_sq})")]
    FilterDivergence { mu_sq: f64 },

    #[error("target {target} infeasible: mean error at the smallest eta is {best}")]
    InfeasibleTarget { target: f64, best: f64 },

    #[error("filter unnecessary: final error {epsilon} is not below input error {input_error}")]
    FilterUnnecessary { epsilon: f64, input_error: f64 },

    #[error("divergent cost: joint success probability is zero")]
    DivergentCost,

    #[error("no overlapping (kappa, delta/epsilon) points between report and baseline")]
    EmptyComparison,

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NoConvergence { .. }
                | Error::Singular { .. }
                | Error::Evaluation { .. }
                | Error::GapViolation { .. }
                | Error::DegenerateSuccess { .. }
                | Error::FilterDivergence { .. }
                | Error::DivergentCost
        )
    }
}
