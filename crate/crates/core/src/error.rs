use crate::mastertree::NodePath;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot parse `{input}` at byte {position}: {reason}")]
    Parse {
        input: String,
        position: usize,
        reason: &'static str,
    },

    #[error("{0} is not a single power of two")]
    NotPowerOfTwo(String),

    #[error("index {index} is beyond the profile cap {cap}")]
    IndexBeyondCap { index: String, cap: u64 },

    #[error("tower height {height} exceeds the depth limit {limit}")]
    DepthExceeded { height: usize, limit: usize },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("operation requires the canonical profile")]
    NotCanonical,

    #[error("{path} is not a node of the master tree: {reason}")]
    InvalidPath { path: NodePath, reason: String },

    #[error("{0} is not in the condition")]
    NotInCondition(NodePath),

    #[error("malformed condition at {path}: {reason}")]
    MalformedCondition { path: NodePath, reason: String },

    #[error("level {level} is not enumerable within {limit} nodes")]
    NotEnumerable { level: usize, limit: usize },

    #[error("amalgamation: {0}")]
    Amalgamation(String),

    #[error("unwitnessed richness obligations: {}", format_obligations(.0))]
    Unwitnessed(Vec<(NodePath, u64)>),

    #[error("name: {0}")]
    Name(String),

    #[error("fusion step rejected ({clause}): {detail}")]
    Fusion {
        clause: crate::fusion::FusionClause,
        detail: String,
    },

    #[error("name is not fresh below {0}")]
    NotFresh(NodePath),

    #[error("no splitting ordinal for the pair {0} / {1}")]
    SplitFailed(NodePath, NodePath),

    #[error("decoding failed at level {level}: {candidates} candidates")]
    Decode { level: usize, candidates: usize },

    #[error("no admissible witness: {0}")]
    NoWitness(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("bound map not admissible: {0}")]
    InadmissibleBound(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn format_obligations(list: &[(NodePath, u64)]) -> String {
    list.iter()
        .map(|(s, n)| format!("({s}, {n})"))
        .collect::<Vec<_>>()
        .join(", ")
}
