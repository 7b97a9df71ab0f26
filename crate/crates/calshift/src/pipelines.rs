//! Small shared pieces of the per-method set-construction pipelines.

use cp_core::{build_set, PredictionSet, ScoreVector};

use crate::scenario::DrawnSample;
use crate::{HarnessError, Result};

/// The nonconformity score each calibration sample assigns to its own true
/// label.
pub fn true_label_scores(samples: &[DrawnSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let scores = require_scores(s)?;
            if s.label >= scores.label_count() {
                return Err(HarnessError::Config(format!(
                    "label {} outside the {}-label score vector",
                    s.label,
                    scores.label_count()
                )));
            }
            Ok(scores.score(s.label))
        })
        .collect()
}

pub fn require_scores(sample: &DrawnSample) -> Result<&ScoreVector> {
    sample.scores.as_ref().ok_or_else(|| {
        HarnessError::Config(
            "samples carry no per-label scores; score-mode data is required to build sets".into(),
        )
    })
}

/// The uninformative full label set (infinite threshold).
pub fn full_label_set(test_scores: &ScoreVector) -> PredictionSet {
    build_set(test_scores, f64::INFINITY).expect("infinite threshold is valid")
}
