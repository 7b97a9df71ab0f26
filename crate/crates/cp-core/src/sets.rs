use std::collections::BTreeMap;

use crate::quantile::{weighted_quantile, WeightedScoreBag};
use crate::score::{MiscoverageLevel, PredictionSet, ScoreVector};
use crate::{compensated_sum, CpError, Result};

/// All labels whose score is `<=` the threshold (ties included).
pub fn build_set(test_scores: &ScoreVector, threshold: f64) -> Result<PredictionSet> {
    if threshold.is_nan() {
        return Err(CpError::InvalidInput("threshold is NaN".into()));
    }
    let labels = test_scores
        .values()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= threshold)
        .map(|(y, _)| y)
        .collect();
    Ok(PredictionSet::from_parts(labels, threshold))
}

/// Weighted conformal prediction set.
///
/// `cal` pairs each calibration score with its raw covariate likelihood
/// ratio evaluated at the calibration input; `test_raw_weight` is the same
/// ratio at the test input and becomes the mass of the `+inf` atom. The
/// weights are self-normalized by their common sum, so any positive
/// rescaling of all raw weights leaves the output unchanged, and uniform
/// raw weights reduce exactly to [`cp_threshold`](crate::cp_threshold)
/// followed by [`build_set`].
pub fn wcp_set(
    test_scores: &ScoreVector,
    cal: &[(f64, f64)],
    test_raw_weight: f64,
    alpha: MiscoverageLevel,
) -> Result<PredictionSet> {
    for (i, (score, weight)) in cal.iter().enumerate() {
        if !score.is_finite() {
            return Err(CpError::InvalidInput(format!(
                "calibration entry {i} has non-finite score {score}"
            )));
        }
        if !weight.is_finite() || *weight < 0.0 {
            return Err(CpError::InvalidInput(format!(
                "calibration entry {i} has invalid raw weight {weight}"
            )));
        }
    }
    if !test_raw_weight.is_finite() || test_raw_weight < 0.0 {
        return Err(CpError::InvalidInput(format!(
            "invalid test raw weight {test_raw_weight}"
        )));
    }
    let total = compensated_sum(cal.iter().map(|(_, w)| *w)) + test_raw_weight;
    if total <= 0.0 {
        return Err(CpError::DegenerateWeights(
            "all raw weights are zero".into(),
        ));
    }
    let entries = cal.iter().map(|(s, w)| (*s, w / total)).collect();
    let bag = WeightedScoreBag::new(entries, test_raw_weight / total)?;
    let threshold = weighted_quantile(&bag, 1.0 - alpha.value())?;
    build_set(test_scores, threshold)
}

/// The `k` labels with the smallest scores; ties broken by ascending label
/// index. The recorded threshold is the k-th smallest score, which under
/// ties may admit labels that were not selected.
pub fn top_k_set(test_scores: &ScoreVector, k: usize) -> Result<PredictionSet> {
    let n = test_scores.label_count();
    if k == 0 || k > n {
        return Err(CpError::InvalidInput(format!(
            "k must lie in 1..={n}, got {k}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        test_scores
            .score(a)
            .total_cmp(&test_scores.score(b))
            .then(a.cmp(&b))
    });
    let labels: Vec<usize> = order[..k].to_vec();
    let threshold = test_scores.score(order[k - 1]);
    Ok(PredictionSet::from_parts(labels, threshold))
}

/// Randomized majority vote over prediction sets sharing one label space:
/// keeps every label contained in more than a `(1 + u) / 2` fraction of the
/// sets. With `u = 0` this is a strict more-than-half vote. The returned
/// threshold is a `+inf` sentinel since the set is not score-defined.
pub fn majority_vote(sets: &[PredictionSet], u: f64) -> Result<PredictionSet> {
    if sets.is_empty() {
        return Err(CpError::InvalidInput("no sets to combine".into()));
    }
    if !(0.0..=1.0).contains(&u) || u.is_nan() {
        return Err(CpError::InvalidInput(format!(
            "vote draw must lie in [0, 1], got {u}"
        )));
    }
    let k = sets.len() as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for set in sets {
        for &label in set.labels() {
            *counts.entry(label).or_insert(0) += 1;
        }
    }
    let cut = (1.0 + u) / 2.0;
    let labels = counts
        .into_iter()
        .filter(|(_, c)| (*c as f64) / k > cut)
        .map(|(label, _)| label)
        .collect();
    Ok(PredictionSet::from_parts(labels, f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(values: &[f64]) -> ScoreVector {
        ScoreVector::new(values.to_vec()).unwrap()
    }

    fn alpha(a: f64) -> MiscoverageLevel {
        MiscoverageLevel::new(a).unwrap()
    }

    #[test]
    fn build_set_examples() {
        let s = scores(&[0.1, 0.9, 0.4]);
        assert_eq!(build_set(&s, 0.4).unwrap().labels(), &[0, 2]);
        assert_eq!(build_set(&s, f64::INFINITY).unwrap().labels(), &[0, 1, 2]);
        // Ties at the threshold are included.
        let tie = scores(&[0.5, 0.5]);
        assert_eq!(build_set(&tie, 0.5).unwrap().labels(), &[0, 1]);
    }

    #[test]
    fn wcp_hand_cdf() {
        // Normalized weights (0.2, 0.6, 0.2 at inf): cumulative 0.2 at s=1,
        // 0.8 at s=2 >= 0.7.
        let s = scores(&[1.0, 2.0, 3.0]);
        let set = wcp_set(&s, &[(1.0, 1.0), (2.0, 3.0)], 1.0, alpha(0.3)).unwrap();
        assert_eq!(set.threshold(), 2.0);
        assert_eq!(set.labels(), &[0, 1]);
    }

    #[test]
    fn wcp_dominant_test_weight_gives_full_set() {
        // The infinity atom holds ~0.998 of the mass.
        let s = scores(&[1.0, 2.0, 3.0]);
        let set = wcp_set(&s, &[(1.0, 0.01), (2.0, 0.01)], 10.0, alpha(0.1)).unwrap();
        assert_eq!(set.threshold(), f64::INFINITY);
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn wcp_rejects_degenerate_and_negative_weights() {
        let s = scores(&[1.0]);
        let err = wcp_set(&s, &[(1.0, 0.0)], 0.0, alpha(0.1)).unwrap_err();
        assert!(matches!(err, CpError::DegenerateWeights(_)));
        let err = wcp_set(&s, &[(1.0, -1.0)], 1.0, alpha(0.1)).unwrap_err();
        assert!(matches!(err, CpError::InvalidInput(_)));
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k_set(&scores(&[0.3, 0.1, 0.2]), 2).unwrap().labels(), &[1, 2]);
        // Tie broken by index.
        assert_eq!(top_k_set(&scores(&[0.5, 0.5, 0.9]), 1).unwrap().labels(), &[0]);
        assert_eq!(top_k_set(&scores(&[3.7]), 1).unwrap().labels(), &[0]);
        assert!(top_k_set(&scores(&[1.0]), 0).is_err());
        assert!(top_k_set(&scores(&[1.0]), 2).is_err());
    }

    #[test]
    fn majority_vote_examples() {
        let set = |labels: &[usize]| PredictionSet::from_parts(labels.to_vec(), f64::INFINITY);
        // Fractions: 0 -> 1.0, 1 -> 1/3, 2 -> 1/3.
        let voted = majority_vote(&[set(&[0, 1]), set(&[0]), set(&[0, 2])], 0.0).unwrap();
        assert_eq!(voted.labels(), &[0]);
        // Unanimous keeps the label even for u close to 1.
        let voted = majority_vote(&[set(&[0]), set(&[0]), set(&[0])], 0.99).unwrap();
        assert_eq!(voted.labels(), &[0]);
        // Exactly half fails the strict inequality.
        let voted = majority_vote(&[set(&[0]), set(&[1])], 0.0).unwrap();
        assert!(voted.is_empty());
        assert!(majority_vote(&[], 0.0).is_err());
    }
}
