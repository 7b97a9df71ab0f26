use cp_core::PredictionSet;

use crate::{HarnessError, Result};

/// Empirical coverage (fraction of test points whose true label landed in
/// the set) and empirical inefficiency (mean set size).
pub fn empirical_metrics(sets: &[PredictionSet], truths: &[usize]) -> Result<(f64, f64)> {
    if sets.is_empty() || sets.len() != truths.len() {
        return Err(HarnessError::Config(format!(
            "metrics need equal nonempty lengths, got {} sets and {} truths",
            sets.len(),
            truths.len()
        )));
    }
    let n = sets.len() as f64;
    let covered = sets
        .iter()
        .zip(truths)
        .filter(|(set, y)| set.contains(**y))
        .count() as f64;
    let size: usize = sets.iter().map(PredictionSet::len).sum();
    Ok((covered / n, size as f64 / n))
}

/// Quartiles (linear interpolation at position `(n - 1) * q` of the sorted
/// values) and the arithmetic mean, matching standard box-plot statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub mean: f64,
    pub n: usize,
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(HarnessError::Config("box stats of an empty list".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(HarnessError::Config(format!("non-finite value {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |q: f64| -> f64 {
        let pos = (sorted.len() - 1) as f64 * q;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        if lo == hi {
            sorted[lo]
        } else {
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    };
    Ok(BoxStats {
        q25: quantile(0.25),
        q50: quantile(0.5),
        q75: quantile(0.75),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        n: sorted.len(),
    })
}
