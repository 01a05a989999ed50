use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VlmcError {
    #[error("alphabet size {0} out of range (expected 2..=10)")]
    Alphabet(usize),
    #[error("letter {letter} out of range for alphabet of size {size}")]
    LetterOutOfRange { letter: u8, size: usize },
    #[error("cannot parse word {0:?}")]
    ParseWord(String),
    #[error("cont undefined for internal words ({0})")]
    ContOfInternal(String),
    #[error("word too short / escapes to infinite branch: {0}")]
    ContNotFound(String),
    #[error("empty word has no alpha-LIS decomposition")]
    EmptyWord,
    #[error("invalid context set: {0}")]
    InvalidTree(String),
    #[error("invalid probabilisation: {0}")]
    InvalidProbabilisation(String),
    #[error("null probabilisation: {0}")]
    NullProbabilisation(String),
    #[error("unknown zoo entry {0:?}")]
    UnknownZoo(String),
    #[error("invalid zoo parameters: {0}")]
    ZooParams(String),
    #[error("{0} is not a context alpha-LIS")]
    NotAlphaLis(String),
    #[error("tree is not stabilizable: {0}")]
    NotStabilizable(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("absorbing self-loop at state {0}")]
    AbsorbingSelfLoop(usize),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no non-negative fixed vector: {0}")]
    NoFixedVector(String),
    #[error("invalid fixed vector: {0}")]
    InvalidFixedVector(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, VlmcError>;

impl From<serde_json::Error> for VlmcError {
    fn from(e: serde_json::Error) -> Self {
        VlmcError::Json(e.to_string())
    }
}
