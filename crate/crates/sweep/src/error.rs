use gkp_core::GkpError;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::ConfigError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Numerics(#[from] GkpError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Output was written but some rows are flagged as unconverged.
    #[error("{failed} of {total} rows did not converge")]
    Unconverged { failed: usize, total: usize },

    #[error("invariant checks failed: {0}")]
    Invariant(String),
}

impl SweepError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SweepError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            SweepError::Config(_) => EXIT_CONFIG,
            SweepError::Numerics(GkpError::InvalidParameter { .. }) => EXIT_CONFIG,
            SweepError::Numerics(e) if e.is_convergence_failure() => EXIT_CONVERGENCE,
            SweepError::Unconverged { .. } => EXIT_CONVERGENCE,
            _ => EXIT_FAILURE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            SweepError::Config(_) => "config",
            SweepError::Numerics(GkpError::InvalidParameter { .. }) => "config",
            SweepError::Numerics(e) if e.is_convergence_failure() => "convergence",
            SweepError::Numerics(_) => "numerics",
            SweepError::Io { .. } => "io",
            SweepError::Unconverged { .. } => "convergence",
            SweepError::Invariant(_) => "invariant",
        }
    }

    /// `{"error": kind, "message": ..., "exit_code": n}` plus `line`/`field`
    /// for configuration errors.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            SweepError::Config(c) => {
                if let Some(line) = c.line {
                    v["line"] = json!(line);
                }
                if let Some(field) = &c.field {
                    v["field"] = json!(field);
                }
            }
            SweepError::Numerics(GkpError::InvalidParameter { name, .. }) => v["field"] = json!(name),
            _ => {}
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let cfg = SweepError::from(crate::config::SweepConfig::parse("rounds = x").unwrap_err());
        assert_eq!(cfg.exit_code(), EXIT_CONFIG);
        let j = cfg.to_json();
        assert_eq!((j["error"].as_str(), j["line"].as_u64(), j["field"].as_str()), (Some("config"), Some(1), Some("rounds")));

        let trunc = SweepError::from(GkpError::Truncation {
            leakage: 1e-3,
            cutoff: 50,
            threshold: 1e-10,
        });
        assert_eq!(trunc.exit_code(), EXIT_CONVERGENCE);
        assert_eq!(SweepError::Unconverged { failed: 1, total: 4 }.exit_code(), EXIT_CONVERGENCE);
        assert_eq!(SweepError::Invariant("x".into()).exit_code(), EXIT_FAILURE);
    }
}
