use crate::score::MiscoverageLevel;
use crate::{compensated_sum, CpError, Result};

/// Total-variation distance estimate from likelihood-ratio evaluations at
/// samples of the calibration distribution: `0.5 * mean(|w - 1|)`, clamped
/// to `[0, 1]` since Monte-Carlo noise can exceed the TV range.
pub fn estimate_tv(cal_weights: &[f64]) -> Result<f64> {
    if cal_weights.is_empty() {
        return Err(CpError::InvalidInput(
            "need at least one weight to estimate TV".into(),
        ));
    }
    if let Some(w) = cal_weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(CpError::InvalidInput(format!(
            "weights must be finite and nonnegative, got {w}"
        )));
    }
    let sum = compensated_sum(cal_weights.iter().map(|w| (w - 1.0).abs()));
    Ok((0.5 * sum / cal_weights.len() as f64).clamp(0.0, 1.0))
}

/// Conservative miscoverage level `max(alpha - tv, 0)`. A result of zero
/// instructs the caller to emit the full label set (the rank formula then
/// yields an infinite threshold).
pub fn ccp_adjust(alpha: MiscoverageLevel, tv_estimate: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&tv_estimate));
    (alpha.value() - tv_estimate).max(0.0)
}
