use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty context")]
    EmptyContext,
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("probability out of range at index {index}: {value}")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("ones count {m} out of range 0..={d}")]
    OnesCountOutOfRange { m: usize, d: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("group count {groups} does not divide channels (in {cin}, out {cout})")]
    GroupDivisibility {
        groups: usize,
        cin: usize,
        cout: usize,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("series too short: length {len}, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("zero denominator: sum of |actuals| is 0")]
    ZeroDenominator,
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
