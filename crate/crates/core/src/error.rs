use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("derivative has a pole at t = {t}")]
    Pole { t: f64 },

    /// An iterative routine stopped before reaching its tolerance.
    /// `best` holds the last iterate (or a bracket for scalar searches).
    #[error("numeric failure: {message} (residual {residual:e})")]
    NumericFailure { message: String, best: Vec<f64>, residual: f64 },

    #[error("operation not available for the {0} tier")]
    UnsupportedTier(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return invalid(format!("expected a point in R^{dim}, got length {}", x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("point has non-finite coordinates");
    }
    Ok(())
}
