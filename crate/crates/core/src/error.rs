use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid weight function `{name}`: {reason}")]
    InvalidWeightFunction { name: String, reason: String },

    #[error("invalid factor graph: {0}")]
    InvalidGraph(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid simplex point: {0}")]
    InvalidSimplexPoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("arity mismatch: expected {expected} incoming messages, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("slot {slot} out of range for arity {arity}")]
    SlotOutOfRange { slot: usize, arity: usize },

    #[error("unknown variable id {0}")]
    UnknownVariable(usize),

    #[error("target variable {0} is clamped")]
    TargetClamped(usize),

    #[error("state space of {states} configurations exceeds the enumeration cap of {cap}")]
    StateSpaceTooLarge { states: f64, cap: u64 },

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("degenerate message product: every spin has zero weight")]
    DegenerateProduct,

    #[error("partition does not match the measure: {0}")]
    PartitionMismatch(String),

    #[error("refinement requested without any REG4 witness")]
    NoWitness,

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
