use thiserror::Error;

#[derive(Debug, Error)]
pub enum RatioMetaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A loss, gradient, or network output left the finite range.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),

    #[error("checkpoint unreadable: {0}")]
    CheckpointCorrupt(String),

    #[error("checkpoint format version {found} unsupported (expected {supported})")]
    CheckpointVersion { found: u32, supported: u32 },
}
