use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("size mismatch: expected {expected} samples, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("zero-mode singularity: {0}")]
    ZeroModeSingularity(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("block index {j} outside {min}..={max}")]
    BlockIndex { j: i32, min: i32, max: i32 },
    #[error("operation unsupported for the {0} block family")]
    UnsupportedFamily(&'static str),
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("exact enumeration over {0} signs exceeds the cap of 20")]
    EnumerationTooLarge(usize),
    #[error("rank error: {0}")]
    Rank(String),
    #[error("empty operator: {0}")]
    EmptyOperator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
