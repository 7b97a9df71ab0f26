use cp_core::ScoreVector;
use num_complex::Complex64;

use crate::channel::{burst_cases, PhyContext};
use crate::code::ConvCode;
use crate::modulation::modulate;
use crate::{PhyError, Result, FRAME_SYMBOLS, MESSAGE_COUNT};

/// Brute-force soft decoder over all 256 candidate messages. It is
/// deliberately context-unaware: distances are scaled by the clean AWGN
/// variance only, matching a universal decoder designed for the
/// interference-free channel.
#[derive(Debug, Clone)]
pub struct Codebook {
    symbols: Vec<Vec<Complex64>>,
    noise_var: f64,
}

impl Codebook {
    pub fn new(code: &ConvCode, snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(PhyError::InvalidInput("snr_db must be finite".into()));
        }
        let symbols = (0..MESSAGE_COUNT)
            .map(|m| modulate(&code.encode(m as u8)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            symbols,
            noise_var: 10f64.powf(-snr_db / 10.0),
        })
    }

    pub fn symbols_of(&self, message: u8) -> &[Complex64] {
        &self.symbols[message as usize]
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Per-message, per-symbol squared Euclidean distances of a received
    /// frame to every codeword. Scoring and the exact frame density both
    /// reduce to weighted combinations of this matrix, so callers handling
    /// the same frame repeatedly can compute it once.
    pub fn distances(&self, received: &[Complex64]) -> Result<FrameDistances> {
        if received.len() != FRAME_SYMBOLS {
            return Err(PhyError::InvalidInput(format!(
                "received frame has {} samples, expected {FRAME_SYMBOLS}",
                received.len()
            )));
        }
        let per_symbol = self
            .symbols
            .iter()
            .map(|s| {
                let mut row = [0.0; FRAME_SYMBOLS];
                for (d, (sym, r)) in row.iter_mut().zip(s.iter().zip(received)) {
                    *d = (r - sym).norm_sqr();
                }
                row
            })
            .collect();
        Ok(FrameDistances { per_symbol })
    }

    /// Negative log posterior scores over all messages: squared Euclidean
    /// distances feed a softmax at the clean noise temperature, so
    /// `sum_y exp(-score[y]) = 1`.
    pub fn scores(&self, received: &[Complex64]) -> Result<ScoreVector> {
        Ok(self.scores_from(&self.distances(received)?))
    }

    pub fn scores_from(&self, frame: &FrameDistances) -> ScoreVector {
        let distances: Vec<f64> = frame
            .per_symbol
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .collect();
        ScoreVector::new(scores_from_distances(&distances, self.noise_var))
            .expect("distances are finite")
    }

    /// Exact log density of a received frame under the coded generator: the
    /// message is marginalized uniformly over all 256 codewords and the
    /// burst unknowns per the context's informativeness level. This is the
    /// ground-truth covariate density of the scenario (the per-symbol
    /// product form in [`crate::log_likelihood`] treats symbols as
    /// independent and is only a model).
    pub fn log_likelihood(&self, received: &[Complex64], context: &PhyContext) -> Result<f64> {
        Ok(self.log_likelihood_from(&self.distances(received)?, context))
    }

    pub fn log_likelihood_from(&self, frame: &FrameDistances, context: &PhyContext) -> f64 {
        let base_var = context.noise_var();
        let burst_var = base_var + context.interference_var();
        let cases = burst_cases(&context.burst, FRAME_SYMBOLS);

        let mut best = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(cases.len() * MESSAGE_COUNT);
        for (log_prior, window) in &cases {
            // Log normalizer of the per-symbol Gaussians for this window.
            let mut log_norm = 0.0;
            for t in 0..FRAME_SYMBOLS {
                let var = match window {
                    Some((lo, hi)) if t >= *lo && t < *hi => burst_var,
                    _ => base_var,
                };
                log_norm -= (std::f64::consts::PI * var).ln();
            }
            for row in &frame.per_symbol {
                let mut quad = 0.0;
                for (t, d) in row.iter().enumerate() {
                    let var = match window {
                        Some((lo, hi)) if t >= *lo && t < *hi => burst_var,
                        _ => base_var,
                    };
                    quad += d / var;
                }
                let lp = log_prior + log_norm - quad - (MESSAGE_COUNT as f64).ln();
                if lp > best {
                    best = lp;
                }
                terms.push(lp);
            }
        }
        best + terms.iter().map(|t| (t - best).exp()).sum::<f64>().ln()
    }

    /// Exact covariate likelihood ratio of the coded generator,
    /// `p(received | test) / p(received | calibration)`, in log space.
    /// These are the weights an ideal weighted calibration uses.
    pub fn likelihood_ratio(
        &self,
        received: &[Complex64],
        test: &PhyContext,
        calibration: &PhyContext,
    ) -> Result<f64> {
        let frame = self.distances(received)?;
        Ok(self.likelihood_ratio_from(&frame, test, calibration))
    }

    pub fn likelihood_ratio_from(
        &self,
        frame: &FrameDistances,
        test: &PhyContext,
        calibration: &PhyContext,
    ) -> f64 {
        (self.log_likelihood_from(frame, test) - self.log_likelihood_from(frame, calibration))
            .exp()
    }
}

/// Distance matrix of one received frame against the whole codebook.
#[derive(Debug, Clone)]
pub struct FrameDistances {
    per_symbol: Vec<[f64; FRAME_SYMBOLS]>,
}

/// `-log softmax(-d / noise_var)`, computed with a shifted log-sum-exp.
fn scores_from_distances(distances: &[f64], noise_var: f64) -> Vec<f64> {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let lse = distances
        .iter()
        .map(|d| (-(d - min) / noise_var).exp())
        .sum::<f64>()
        .ln();
    distances.iter().map(|d| (d - min) / noise_var + lse).collect()
}
