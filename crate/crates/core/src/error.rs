use thiserror::Error;

pub type Result<T> = std::result::Result<T, DbnError>;

#[derive(Debug, Error)]
pub enum DbnError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A model or evidence file could not be parsed. `location` names the
    /// line/column or JSON field of the first malformed entry.
    #[error("malformed file at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported model format version {found}; supported versions: {supported}")]
    UnsupportedVersion { found: u64, supported: String },

    /// A resource cap was exceeded. `what` names the offending object
    /// (state space, frontier, elimination factor, ...).
    #[error("{what}: size {size} exceeds cap {cap}")]
    CapExceeded { what: String, size: u128, cap: u128 },

    #[error("zero-probability evidence at t={t}")]
    ZeroProbabilityEvidence { t: usize },

    #[error("impossible evidence: total probability mass is zero")]
    ImpossibleEvidence,

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("model is not regular: {0}")]
    NotRegular(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DbnError {
    pub fn is_cap_exceeded(&self) -> bool {
        matches!(self, DbnError::CapExceeded { .. })
    }
}

/// Resource caps shared by the engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Maximum flattened state count S for `flatten_to_hmm`.
    pub flat_states: usize,
    /// Maximum number of joint hidden trajectories enumerated by the brute-force oracle.
    pub brute_force_assignments: u128,
    /// Maximum frontier joint table size.
    pub frontier_joint: usize,
    /// Maximum cluster (or mega-node) state count.
    pub cluster_states: usize,
    /// Maximum intermediate factor size during variable elimination.
    pub elimination_factor: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            flat_states: 4096,
            brute_force_assignments: 1 << 24,
            frontier_joint: 1 << 22,
            cluster_states: 1 << 12,
            elimination_factor: 1 << 22,
        }
    }
}
