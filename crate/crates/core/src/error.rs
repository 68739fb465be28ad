use thiserror::Error;

/// Errors raised while building concept sets or running the association statistics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("embedding has zero norm (cosine undefined)")]
    ZeroNorm,

    #[error("embedding must have at least one component")]
    EmptyEmbedding,

    #[error("embedding component {index} is not finite")]
    NonFinite { index: usize },

    #[error("concept set `{0}` is empty")]
    EmptySet(String),

    #[error("concept set `{name}` has role {actual}, expected {expected}")]
    RoleMismatch {
        name: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("concept sets in one test must have distinct names, got `{0}` twice")]
    DuplicateName(String),

    #[error("need at least two target embeddings in X and Y combined, got {0}")]
    TooFewTargets(usize),

    #[error("exact enumeration requested but there are {partitions} partitions (limit {max})")]
    ExactTooLarge { partitions: String, max: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
