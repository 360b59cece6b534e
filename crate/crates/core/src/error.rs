//! Error type shared across the crate.
//!
//! Errors split into two families, mirrored by the CLI exit codes:
//! validation problems (bad dimensions, bad arguments, unreadable configs —
//! exit code 2) and numerical problems (non-convergence, non-finite values,
//! truncated enumerations — exit code 3).

use std::path::PathBuf;

use crate::support::SupportAtlas;

pub type Result<T> = std::result::Result<T, RreError>;

#[derive(Debug, thiserror::Error)]
pub enum RreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(
        "fixed-point iteration did not converge after {iterations} iterations \
         (residual {residual:.3e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error(
        "support enumeration truncated: node budget {max_nodes} exhausted at \
         depth {reached_depth} (partial atlas retained)"
    )]
    AtlasTruncated {
        max_nodes: usize,
        reached_depth: usize,
        partial: Box<SupportAtlas>,
    },

    #[error("config validation failed:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<String>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {origin}: {source}")]
    Json {
        origin: String,
        #[source]
        source: serde_json::Error,
    },
}

impl RreError {
    /// CLI exit code for this error: 2 for validation/input problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RreError::DimensionMismatch(_)
            | RreError::InvalidArgument(_)
            | RreError::Validation(_)
            | RreError::Io { .. }
            | RreError::Json { .. } => 2,
            RreError::NonFinite(_)
            | RreError::NoConvergence { .. }
            | RreError::AtlasTruncated { .. }
            | RreError::Numerical(_) => 3,
        }
    }
}
