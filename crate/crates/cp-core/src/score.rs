use crate::{CpError, Result};

/// Per-label nonconformity scores for one input, indexed by label
/// `0..label_count`. Smaller is better.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CpError::InvalidInput(
                "score vector needs at least one label".into(),
            ));
        }
        if let Some((label, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(CpError::InvalidInput(format!(
                "score for label {label} is not finite: {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label_count(&self) -> usize {
        self.values.len()
    }

    /// Score of one label; panics on an out-of-range label.
    pub fn score(&self, label: usize) -> f64 {
        self.values[label]
    }
}

/// Target miscoverage level `alpha`, restricted to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiscoverageLevel(f64);

impl MiscoverageLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(CpError::InvalidInput(format!(
                "miscoverage level must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A set of label indices together with the threshold that produced it.
///
/// For threshold-built sets the labels are exactly `{y : score[y] <= threshold}`.
/// Top-k and majority-vote sets record a sentinel threshold instead (the k-th
/// smallest score and `+inf` respectively) because they are not defined by a
/// score cut alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    labels: Vec<usize>,
    threshold: f64,
}

impl PredictionSet {
    pub(crate) fn from_parts(mut labels: Vec<usize>, threshold: f64) -> Self {
        labels.sort_unstable();
        labels.dedup();
        Self { labels, threshold }
    }

    /// Label indices in ascending order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}
