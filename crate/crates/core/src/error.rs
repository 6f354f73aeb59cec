use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty-sample")]
    EmptySample,
    #[error("invalid-sample-size: s={s}, n={n}")]
    InvalidSampleSize { s: u64, n: u64 },
    #[error("invalid-hypergeom-params: m={m}, n={n}, s={s}, k={k}")]
    InvalidHypergeomParams { m: u64, n: u64, s: u64, k: u64 },
    #[error("method-requires-binary: hypergeometric-exact needs 0/1 values on range [0, 1]")]
    MethodRequiresBinary,
    #[error("budget-exhausted: failure probabilities sum to {0}")]
    BudgetExhausted(f64),
    #[error("budget-mismatch: {what} needs {expected} parts, got {got}")]
    BudgetMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid confidence parameter {0}: must lie in (0, 1)")]
    InvalidDelta(f64),
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("sample value {value} outside range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown-node: {0}")]
    UnknownNode(String),
    #[error("self-loop on node {0}")]
    SelfLoop(String),
    #[error("identity-pair-forbidden: ({0}, {0})")]
    IdentityPair(String),
    #[error("ky-violated: node {node} has {count} actual matches, cap is {cap}")]
    KyViolated { node: String, count: usize, cap: usize },
    #[error("no-identified-matches")]
    NoIdentifiedMatches,
    #[error("no-usable-sample: {0}")]
    NoUsableSample(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("degenerate config: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
