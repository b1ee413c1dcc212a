use thiserror::Error;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frame too short: {len} steps, need at least {needed}")]
    FrameTooShort { len: usize, needed: usize },
    #[error("partition `{0}` would be empty")]
    EmptyPartition(&'static str),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("missing channel {0}")]
    MissingChannel(String),
    #[error("frame invariant violated: {0}")]
    InvalidFrame(String),

    #[error("empty input file")]
    EmptyFile,
    #[error("readings span less than two hours")]
    SpanTooShort,
    #[error("csv: {0}")]
    Csv(String),

    #[error("invalid feature-set code `{0}`")]
    InvalidCode(String),
    #[error("duplicate token `{token}` in feature-set code `{code}`")]
    DuplicateToken { code: String, token: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("filter of length {k} longer than sequence of length {l}")]
    FilterTooLong { k: usize, l: usize },
    #[error("stride {0} not supported for this convolution mode")]
    BadStride(usize),
    #[error("batch norm needs more than one value per feature in train mode")]
    DegenerateBatch,
    #[error("dropout rate {0} outside [0, 1)")]
    BadRate(f64),
    #[error("channel mask is empty")]
    EmptyMask,
    #[error("non-finite gradient for `{0}`")]
    NonFiniteGradient(String),
    #[error("graph is non-deterministic in train mode (unpinned dropout)")]
    NonDeterministic,

    #[error("syntax error in model configuration `{0}`")]
    SyntaxError(String),
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("non-positive dimension in `{0}`")]
    NonPositiveDimension(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("fold {fold} too small: {reason}")]
    FoldTooSmall { fold: usize, reason: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("sample fraction {0} yields no configurations")]
    BadFraction(f64),
    #[error("no trial records")]
    NoRecords,
    #[error("trial {trial} has {size} records, fewer than k = {k}")]
    TrialTooSmall { trial: usize, size: usize, k: usize },
    #[error("need at least {needed} models, got {got}")]
    TooFewModels { needed: usize, got: usize },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),

    #[error("invalid scenario: {0}")]
    BadSpec(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
