use thiserror::Error;

#[derive(Debug, Error)]
pub enum CpError {
    /// A precondition on the inputs was violated (non-finite value, empty
    /// collection, out-of-range parameter, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every raw importance weight (calibration and test) was zero, so the
    /// empirical distribution cannot be normalized.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),
}
