use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GkpError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The state populates the top of the truncated Fock basis.
    #[error("truncation: leakage {leakage:.3e} at cutoff {cutoff} exceeds {threshold:.1e}")]
    Truncation {
        leakage: f64,
        cutoff: usize,
        threshold: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    #[error("{what} did not converge: {detail}")]
    NotConverged { what: &'static str, detail: String },

    #[error("root bracket [{lo}, {hi}] does not change sign (f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e})")]
    BracketFailure {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
}

impl GkpError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        GkpError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures that a larger cutoff or finer grid could fix.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            GkpError::Truncation { .. } | GkpError::NotConverged { .. }
        )
    }
}

pub type Result<T, E = GkpError> = std::result::Result<T, E>;
