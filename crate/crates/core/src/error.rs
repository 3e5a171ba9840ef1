use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("field modulus must be at least 2, got {0}")]
    ModulusTooSmall(u64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrices live over different fields (q={0} vs q={1})")]
    FieldMismatch(u64, u64),
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("index {index} out of range 0..={max}")]
    OutOfRange { index: usize, max: usize },
    #[error("parameters out of scope: {0}")]
    OutOfScope(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("candidate space too large: {0} vectors")]
    TooLarge(u128),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("construction failed after {0} attempts")]
    ConstructionFailed(u32),
    #[error("repair failed after {0} attempts")]
    RepairFailed(u32),
    #[error("invalid helpers: {0}")]
    InvalidHelpers(String),
    #[error("vector {0:?} is not a member of H")]
    HNotMember(Vec<usize>),
    #[error("rank deficient: rank {rank} < {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("helper pool is empty")]
    EmptyHelperPool,
    #[error("internal contradiction: {0}")]
    InternalContradiction(String),
    #[error("field GF({0}) too small, need q >= 7")]
    FieldTooSmall(u64),
    #[error("invalid (failed, unavailable) pair ({0}, {1})")]
    InvalidPair(usize, usize),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
