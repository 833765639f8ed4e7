use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {points} points but {probs} probabilities")]
    LengthMismatch { points: usize, probs: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("probabilities sum to {sum}, not 1")]
    BadMass { sum: f64 },

    #[error("support point {0} has no code assigned")]
    Unassigned(usize),

    #[error("code {code} out of range for codebook of size {k}")]
    CodeOutOfRange { code: usize, k: usize },

    #[error("code {0} has zero probability mass")]
    EmptyCell(usize),

    #[error("codebook size {k} exceeds support size {n}")]
    TooManyCells { k: usize, n: usize },

    #[error("support of {size} points exceeds the solver cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("enumeration of {count} assignments exceeds the cap of {cap}")]
    EnumerationCap { count: f64, cap: u64 },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("unbounded linear program")]
    Unbounded,

    #[error("iteration limit of {0} pivots reached")]
    IterationLimit(usize),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("decoder table is not injective: codes {0} and {1} share an output")]
    NotBijective(usize, usize),

    #[error("invalid source spec: {0}")]
    SourceSpec(String),

    #[error("invalid codec: {0}")]
    Codec(String),
}
