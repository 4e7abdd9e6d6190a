use thiserror::Error;

/// Errors surfaced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("measure is not integrable: {0}")]
    NonIntegrable(String),
    #[error("degenerate window [{0}, {1}]")]
    DegenerateWindow(f64, f64),
    #[error("observable is not sub-exponential (no finite Psi_1 scale below {0})")]
    NotSubExponential(f64),
    #[error("missing derivative: {0}")]
    MissingDerivative(&'static str),
    #[error("tilt by {0} diverges")]
    TiltDiverges(f64),
    #[error("target barycenter {0} is out of range")]
    OutOfRange(f64),
    #[error("invalid bound: {0}")]
    InvalidBound(String),
    #[error("not weakly Gaussian: {0}")]
    NotWeaklyGaussian(String),
    #[error("mu2 is not absolutely continuous with respect to mu1 near x = {0}")]
    NotAbsolutelyContinuous(f64),
    #[error("integral diverges: {0}")]
    Diverges(String),
    #[error("curvature too negative: {0}")]
    CurvatureTooNegative(String),
    #[error("invalid L = {0}")]
    InvalidL(f64),
    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Z_E estimate {value} is within 3 standard errors ({stderr}) of zero")]
    ZeDegenerate { value: f64, stderr: f64 },
    #[error("interaction too strong: {0}")]
    InteractionTooStrong(String),
    #[error("missing statistic: {0}")]
    MissingStats(&'static str),
    #[error("site measure is not log-concave (V'' = {value} at x = {x})")]
    NotLogConcave { x: f64, value: f64 },
    #[error("mean spin {0} is unreachable")]
    Unreachable(f64),
    #[error("fixed-point map is not contracting (observed ratio {0})")]
    NoContraction(f64),
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error("interaction matrix is zero")]
    ZeroMatrix,
    #[error("site is not sub-Gaussian: even-moment ratios grow with k")]
    NotSubGaussian,
    #[error("grid too coarse: relative Richardson error {0}")]
    GridTooCoarse(f64),
    #[error("trace too short: {got} samples, need {need}")]
    TraceTooShort { got: usize, need: usize },
    #[error("autocorrelation shows no decay")]
    NoDecay,
    #[error("invalid configuration: {0}")]
    InvalidSpec(String),
}

impl Error {
    /// True for errors caused by malformed input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DegenerateWindow(..)
                | Error::InvalidBound(_)
                | Error::InvalidL(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidSpec(_)
                | Error::TooFewSamples { .. }
                | Error::MissingDerivative(_)
                | Error::MissingStats(_)
                | Error::NotWeaklyGaussian(_)
                | Error::NotLogConcave { .. }
                | Error::CurvatureTooNegative(_)
                | Error::InteractionTooStrong(_)
        )
    }

    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonIntegrable(_) => "non_integrable",
            Error::DegenerateWindow(..) => "degenerate_window",
            Error::NotSubExponential(_) => "not_sub_exponential",
            Error::MissingDerivative(_) => "missing_derivative",
            Error::TiltDiverges(_) => "tilt_diverges",
            Error::OutOfRange(_) => "out_of_range",
            Error::InvalidBound(_) => "invalid_bound",
            Error::NotWeaklyGaussian(_) => "not_weakly_gaussian",
            Error::NotAbsolutelyContinuous(_) => "not_absolutely_continuous",
            Error::Diverges(_) => "diverges",
            Error::CurvatureTooNegative(_) => "curvature_too_negative",
            Error::InvalidL(_) => "invalid_l",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeDegenerate { .. } => "ze_degenerate",
            Error::InteractionTooStrong(_) => "interaction_too_strong",
            Error::MissingStats(_) => "missing_stats",
            Error::NotLogConcave { .. } => "not_log_concave",
            Error::Unreachable(_) => "unreachable",
            Error::NoContraction(_) => "no_contraction",
            Error::MaxIterations(_) => "max_iterations",
            Error::ZeroMatrix => "zero_matrix",
            Error::NotSubGaussian => "not_sub_gaussian",
            Error::GridTooCoarse(_) => "grid_too_coarse",
            Error::TraceTooShort { .. } => "trace_too_short",
            Error::NoDecay => "no_decay",
            Error::InvalidSpec(_) => "invalid_spec",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
