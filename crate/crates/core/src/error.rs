use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the sensitivity, unlearning and harness layers.
///
/// The variants are grouped so that a front end can map them onto coarse
/// exit statuses: configuration problems, malformed data, and numerical
/// degeneracy (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a structural invariant (bounds, shape, labels).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A sensitivity bound is infinite for this instance.
    #[error("unbounded sensitivity: {0}")]
    Unbounded(String),

    /// A noise calibration was requested from a report that may not be reused
    /// across the unlearn and retrain branches.
    #[error("unsound calibration: {0}")]
    Calibration(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("training data is not separable: {0}")]
    NonSeparable(String),

    /// The hypothesis of a bound does not hold; `deficit` is how far off it is.
    #[error("condition failed: {reason} (deficit {deficit:e})")]
    ConditionFailed { reason: String, deficit: f64 },

    #[error("solver did not converge: {0}")]
    Convergence(String),

    #[error("degenerate curvature: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Calibration(_) => ErrorCategory::Config,
            Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Disconnected { .. }
            | Error::NonSeparable(_) => ErrorCategory::Data,
            Error::Unbounded(_)
            | Error::ConditionFailed { .. }
            | Error::Convergence(_)
            | Error::Degenerate(_) => ErrorCategory::Numerical,
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
