use num_complex::Complex64;
use rand::Rng;

use crate::gaussian::standard_normal;
use crate::{PhyError, Result, FRAME_SYMBOLS};

/// How much the context reveals about the interference burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Informativeness {
    Least,
    Moderate,
    Most,
}

impl Informativeness {
    pub fn tag(self) -> &'static str {
        match self {
            Informativeness::Least => "least",
            Informativeness::Moderate => "moderate",
            Informativeness::Most => "most",
        }
    }
}

/// Burst knowledge carried by a context, by informativeness level: the
/// least informative level knows only the burst probability and duration,
/// the moderate level also whether a burst occurs, and the most informative
/// level additionally its start symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum BurstProfile {
    Least { burst_prob: f64, burst_len: usize },
    Moderate { active: bool, burst_len: usize },
    Most { active: bool, burst_len: usize, burst_start: usize },
}

/// An interference context: the burst profile plus the link's SNR and INR
/// in dB. Symbol energy is one, so the AWGN variance is `10^(-snr/10)` and
/// the extra in-burst variance is that times `10^(inr/10)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyContext {
    pub burst: BurstProfile,
    pub snr_db: f64,
    pub inr_db: f64,
}

impl PhyContext {
    pub fn new(burst: BurstProfile, snr_db: f64, inr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() || !inr_db.is_finite() {
            return Err(PhyError::InvalidInput(
                "snr_db and inr_db must be finite".into(),
            ));
        }
        match &burst {
            BurstProfile::Least { burst_prob, burst_len } => {
                if !(0.0..=1.0).contains(burst_prob) || burst_prob.is_nan() {
                    return Err(PhyError::InvalidInput(format!(
                        "burst probability {burst_prob} outside [0, 1]"
                    )));
                }
                if *burst_len > FRAME_SYMBOLS {
                    return Err(PhyError::InvalidInput(format!(
                        "burst length {burst_len} exceeds the frame"
                    )));
                }
            }
            BurstProfile::Moderate { burst_len, .. } => {
                if *burst_len > FRAME_SYMBOLS {
                    return Err(PhyError::InvalidInput(format!(
                        "burst length {burst_len} exceeds the frame"
                    )));
                }
            }
            BurstProfile::Most { burst_len, burst_start, .. } => {
                if *burst_len > FRAME_SYMBOLS || *burst_start >= FRAME_SYMBOLS {
                    return Err(PhyError::InvalidInput(format!(
                        "burst window ({burst_start}, {burst_len}) exceeds the frame"
                    )));
                }
            }
        }
        Ok(Self { burst, snr_db, inr_db })
    }

    pub fn informativeness(&self) -> Informativeness {
        match self.burst {
            BurstProfile::Least { .. } => Informativeness::Least,
            BurstProfile::Moderate { .. } => Informativeness::Moderate,
            BurstProfile::Most { .. } => Informativeness::Most,
        }
    }

    /// AWGN variance outside a burst (unit symbol energy).
    pub fn noise_var(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    /// Additional variance inside a burst.
    pub fn interference_var(&self) -> f64 {
        self.noise_var() * 10f64.powf(self.inr_db / 10.0)
    }

    /// Numeric context feature vector: the binary indicator passes through
    /// as 0/1, durations and starts as plain counts.
    pub fn features(&self) -> Vec<f64> {
        match &self.burst {
            BurstProfile::Least { burst_prob, burst_len } => {
                vec![*burst_prob, *burst_len as f64]
            }
            BurstProfile::Moderate { active, burst_len } => {
                vec![f64::from(u8::from(*active)), *burst_len as f64]
            }
            BurstProfile::Most { active, burst_len, burst_start } => vec![
                f64::from(u8::from(*active)),
                *burst_len as f64,
                *burst_start as f64,
            ],
        }
    }

    /// Canonical context id, stable across runs.
    pub fn id(&self) -> String {
        match &self.burst {
            BurstProfile::Least { burst_prob, burst_len } => {
                format!("p{:03}-b{burst_len}", (burst_prob * 100.0).round() as u32)
            }
            BurstProfile::Moderate { active, burst_len } => {
                format!("i{}-b{burst_len}", u8::from(*active))
            }
            BurstProfile::Most { active, burst_len, burst_start } => {
                format!("i{}-b{burst_len}-s{burst_start}", u8::from(*active))
            }
        }
    }
}

/// Burst window as a half-open symbol range, clipped at the frame end
/// (no wrap-around).
pub(crate) fn burst_window(
    active: bool,
    start: usize,
    len: usize,
    frame_len: usize,
) -> Option<(usize, usize)> {
    if !active || len == 0 {
        return None;
    }
    Some((start.min(frame_len), (start + len).min(frame_len)))
}

/// The burst configurations a context leaves unresolved, as
/// `(log prior, window)` cases: one fixed case for the most informative
/// level, a uniform burst start for the moderate level, and additionally
/// the burst occurrence for the least informative level.
pub(crate) fn burst_cases(
    profile: &BurstProfile,
    frame_len: usize,
) -> Vec<(f64, Option<(usize, usize)>)> {
    let t = frame_len as f64;
    match profile {
        BurstProfile::Most { active, burst_len, burst_start } => {
            vec![(0.0, burst_window(*active, *burst_start, *burst_len, frame_len))]
        }
        BurstProfile::Moderate { active: false, .. } => vec![(0.0, None)],
        BurstProfile::Moderate { active: true, burst_len } => (0..frame_len)
            .map(|s| (-t.ln(), burst_window(true, s, *burst_len, frame_len)))
            .collect(),
        BurstProfile::Least { burst_prob, burst_len } => {
            let mut cases = Vec::new();
            if *burst_prob < 1.0 {
                cases.push(((1.0 - burst_prob).ln(), None));
            }
            if *burst_prob > 0.0 {
                let lp = burst_prob.ln() - t.ln();
                for s in 0..frame_len {
                    cases.push((lp, burst_window(true, s, *burst_len, frame_len)));
                }
            }
            cases
        }
    }
}

/// Transmit `symbols` through the context's channel: circularly symmetric
/// complex Gaussian noise of total variance `noise_var` per sample, raised
/// by `interference_var` inside the burst window. Burst unknowns the
/// context does not pin down (occurrence for the least informative level,
/// start for least and moderate) are drawn from `rng`.
pub fn apply_channel<R: Rng + ?Sized>(
    symbols: &[Complex64],
    context: &PhyContext,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let t = symbols.len();
    let (active, start, len) = match context.burst {
        BurstProfile::Least { burst_prob, burst_len } => {
            let active = rng.random::<f64>() < burst_prob;
            (active, rng.random_range(0..t), burst_len)
        }
        BurstProfile::Moderate { active, burst_len } => {
            (active, rng.random_range(0..t), burst_len)
        }
        BurstProfile::Most { active, burst_len, burst_start } => {
            (active, burst_start, burst_len)
        }
    };
    let window = burst_window(active, start, len, t);
    let base_var = context.noise_var();
    let burst_var = base_var + context.interference_var();

    Ok(symbols
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let var = match window {
                Some((lo, hi)) if i >= lo && i < hi => burst_var,
                _ => base_var,
            };
            let scale = (var / 2.0).sqrt();
            s + Complex64::new(scale * standard_normal(rng), scale * standard_normal(rng))
        })
        .collect())
}

/// The default context grid for each informativeness level, sized so that
/// the most informative level supports up to 15 meta-training contexts.
pub fn default_grid(level: Informativeness, snr_db: f64, inr_db: f64) -> Vec<PhyContext> {
    let mut grid = Vec::new();
    match level {
        Informativeness::Most => {
            for active in [false, true] {
                for burst_len in [2, 4, 6] {
                    for burst_start in [0, 2, 4] {
                        grid.push(
                            PhyContext::new(
                                BurstProfile::Most { active, burst_len, burst_start },
                                snr_db,
                                inr_db,
                            )
                            .expect("grid entries are valid"),
                        );
                    }
                }
            }
        }
        Informativeness::Moderate => {
            for active in [false, true] {
                for burst_len in [2, 4, 6] {
                    grid.push(
                        PhyContext::new(
                            BurstProfile::Moderate { active, burst_len },
                            snr_db,
                            inr_db,
                        )
                        .expect("grid entries are valid"),
                    );
                }
            }
        }
        Informativeness::Least => {
            for burst_prob in [0.2, 0.5, 0.8] {
                for burst_len in [2, 4, 6] {
                    grid.push(
                        PhyContext::new(
                            BurstProfile::Least { burst_prob, burst_len },
                            snr_db,
                            inr_db,
                        )
                        .expect("grid entries are valid"),
                    );
                }
            }
        }
    }
    grid
}
