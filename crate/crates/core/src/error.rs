use thiserror::Error;

/// Errors raised by the sweep engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("duplicate item id `{0}`")]
    DuplicateId(String),

    #[error("every feature column is constant; nothing left to standardize")]
    AllConstant,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("vocabulary is empty after filtering")]
    EmptyVocabulary,

    #[error("partition violation: {0}")]
    Partition(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("unknown iteration `{0}`")]
    UnknownIteration(String),

    #[error("unknown group {group} in iteration `{key}`")]
    UnknownGroup { key: String, group: i64 },

    #[error("not enough rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("input kind does not match method: {0}")]
    InputMismatch(String),

    #[error("projection plugin `{0}` is not registered")]
    UnknownPlugin(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
