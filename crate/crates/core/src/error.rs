use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distribution needs at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("rhino probability d[{index}] = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("invalid mixed strategy: {0}")]
    InvalidStrategy(String),
    #[error("site {site} out of range for {n} sites")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid utility {0}, expected -1, 0 or 1")]
    InvalidUtility(i8),
    #[error("memory is empty")]
    EmptyMemory,
    #[error("invalid agent spec: {0}")]
    InvalidSpec(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("game log is empty")]
    EmptyLog,
    #[error("horizon {got} is shorter than the required {needed} rounds")]
    HorizonTooShort { needed: usize, got: usize },
    #[error("need at least {needed} vectors for clustering, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("oracle failed: {0}")]
    Oracle(String),
    #[error("malformed log record at line {line}: {message}")]
    MalformedLog { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
