use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is disconnected")]
    Disconnected,
    #[error("nonpositive coupling {coupling} on bond {{{u}, {v}}}")]
    NonPositiveCoupling { u: String, v: String, coupling: f64 },
    #[error("duplicate bond {{{u}, {v}}}")]
    DuplicateBond { u: String, v: String },
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("self-loop at vertex {0}")]
    SelfLoop(String),
    #[error("empty coupling support")]
    EmptySupport,
    #[error("torus side {side} must exceed twice the range {range}")]
    TorusTooSmall { side: usize, range: f64 },
    #[error("{bonds} bonds exceed the enumeration cap {cap}")]
    CapExceeded { bonds: usize, cap: usize },
    #[error("source set has odd cardinality")]
    OddSourceSet,
    #[error("geometry mismatch")]
    GeometryMismatch,
    #[error("divergent chain: contraction factor {rho} is not below 1")]
    DivergentChain { rho: f64 },
    #[error("diagonal point x = o is excluded")]
    Diagonal,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("negative field entry {value} at index {index}")]
    NegativeField { index: usize, value: f64 },
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
    #[error("parity pattern violated: {0}")]
    ParityPattern(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("unknown suite {0}")]
    UnknownSuite(String),
    #[error("unknown strategy {0}")]
    UnknownStrategy(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
