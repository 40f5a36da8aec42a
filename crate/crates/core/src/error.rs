use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin model: {0}")]
    InvalidModel(String),
    #[error("dimension cap exceeded: {n} sites > cap {cap}")]
    DimensionCap { n: usize, cap: usize },
    #[error("index {index} out of range for {n} sites")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("degenerate ground state (gap {0:e} GHz)")]
    DegenerateGround(f64),
    #[error("near-degenerate denominator {omega:e} GHz for excited level {level}")]
    NearDegenerate { level: usize, omega: f64 },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("level identification failed: overlap {0:.3} < 0.5")]
    LevelIdentification(f64),
    #[error("invalid circuit parameters: {0}")]
    InvalidCircuit(String),
    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),
    #[error("invalid grouping plan: {0}")]
    InvalidPlan(String),
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
