use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("reference policy has zero mass at context {s}, action {a}")]
    ZeroSupport { s: usize, a: usize },
    #[error("{what} is not a probability vector (sum {sum})")]
    NotStochastic { what: String, sum: f64 },
    #[error("reward {value} at ({s}, {a}) is outside [{lo}, {hi}]")]
    RewardOutOfRange {
        s: usize,
        a: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("eta must be a positive finite real, got {0}")]
    NonPositiveEta(f64),
    #[error("reference row has no positive mass")]
    ZeroRefMass,
    #[error("policy puts zero mass on ({s}, {a}) where the reference policy is positive")]
    MissingSupport { s: usize, a: usize },
    #[error("suboptimality identity mismatch: psi formula {formula}, direct difference {direct}")]
    IdentityMismatch { formula: f64, direct: f64 },
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("feature at ({s}, {a}) lies outside the range of the policy second-moment matrix")]
    OutOfRangeFeature { s: usize, a: usize },
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("pessimism violated at action {a}: estimate {estimate} exceeds reward {reward}")]
    PessimismViolated { a: usize, estimate: f64, reward: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("log-log fit needs positive means, got {0}")]
    NonPositiveMean(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trial with seed {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
