//! Fully synthetic interference-limited link used as a ground-truth test
//! bed: short messages pass through a tail-biting convolutional code and
//! 4-QAM onto an AWGN channel whose noise power rises inside a burst
//! window. Because every distribution is known in closed form, the exact
//! conditional likelihood of a received frame given the interference
//! context is available, and with it the exact covariate likelihood ratios
//! that an ideal weighted calibration would use.
//!
//! A 1-D Gaussian toy scenario with the same oracle structure lives in
//! [`gaussian`] for analytic property tests.

mod code;
mod channel;
mod decoder;
pub mod gaussian;
mod likelihood;
mod modulation;

pub use channel::{apply_channel, default_grid, BurstProfile, Informativeness, PhyContext};
pub use code::ConvCode;
pub use decoder::Codebook;
pub use likelihood::{likelihood, likelihood_ratio, log_likelihood};
pub use modulation::{modulate, CONSTELLATION};

use num_complex::Complex64;
use thiserror::Error;

/// Frame length in information bits, coded bits, and channel symbols.
pub const FRAME_BITS: usize = 8;
pub const CODED_BITS: usize = 16;
pub const FRAME_SYMBOLS: usize = 8;
/// Number of candidate messages a list decoder scores.
pub const MESSAGE_COUNT: usize = 256;

#[derive(Debug, Error)]
pub enum PhyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, PhyError>;

/// One simulated transmission: the drawn message, its deterministic
/// encoding, and the noisy received samples under `context`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyFrame {
    pub message: u8,
    pub coded_bits: Vec<u8>,
    pub symbols: Vec<Complex64>,
    pub received: Vec<Complex64>,
    pub context: PhyContext,
}

/// Draw a uniform message and push it through encode, modulate, channel.
pub fn generate_frame<R: rand::Rng + ?Sized>(
    code: &ConvCode,
    context: &PhyContext,
    rng: &mut R,
) -> Result<PhyFrame> {
    let message: u8 = rng.random();
    let coded_bits = code.encode(message);
    let symbols = modulate(&coded_bits)?;
    let received = apply_channel(&symbols, context, rng)?;
    Ok(PhyFrame {
        message,
        coded_bits,
        symbols,
        received,
        context: context.clone(),
    })
}
