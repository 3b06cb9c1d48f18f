use thiserror::Error;

/// Everything that can go wrong when building or evaluating channel objects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("entries sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("non-finite entry at {index}")]
    NonFinite { index: usize },

    #[error("empty alphabet")]
    EmptyAlphabet,

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("symbol {symbol} at position {position} is outside an alphabet of size {size}")]
    SymbolOutOfRange {
        symbol: usize,
        position: usize,
        size: usize,
    },

    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid axis selection: {0}")]
    AxisNaming(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error(
        "no time-sharing decomposition with at most 4 components reproduces the input distribution"
    )]
    NoDecomposition,

    #[error("type is not achievable at block length {n}")]
    TypeNotAchievable { n: usize },

    #[error("construction infeasible: {0}")]
    Infeasible(String),

    #[error("empty pair set")]
    EmptySet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rate precondition unmet: {0}")]
    RatePrecondition(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
