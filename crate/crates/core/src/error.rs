use thiserror::Error;

use crate::trust::TrustError;
use crate::types::{AgentId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Trust(#[from] TrustError),

    #[error("invalid report profile: {} violation(s)", .0.len())]
    InvalidProfile(Vec<Violation>),

    #[error("bundle of {size} tasks exceeds the cap of {cap}")]
    BundleTooLarge { size: usize, cap: usize },

    #[error("hypergraph would hold {count} valuation edges (cap {cap})")]
    GraphTooLarge { count: u128, cap: u128 },

    #[error("instance too large for oracle: {0}")]
    OracleTooLarge(String),

    #[error("instance shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("min-marginal unsupported for non-monotone trust: {0}")]
    MinMarginalUnsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no true cost for bundle {bundle} of {agent}")]
    UnknownTrueCost { agent: AgentId, bundle: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
