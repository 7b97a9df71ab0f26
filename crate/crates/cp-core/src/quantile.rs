use crate::score::MiscoverageLevel;
use crate::{compensated_sum, CompensatedSum, CpError, Result};

/// A weighted empirical distribution over finite scores plus a point mass at
/// `+inf`. This is the object whose quantiles drive every conformal
/// threshold: plain conformal prediction is the special case of uniform
/// weights `1/(n+1)` with the `+inf` atom holding one share.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedScoreBag {
    entries: Vec<(f64, f64)>,
    infinity_weight: f64,
}

impl WeightedScoreBag {
    pub fn new(entries: Vec<(f64, f64)>, infinity_weight: f64) -> Result<Self> {
        for (i, (score, weight)) in entries.iter().enumerate() {
            if !score.is_finite() {
                return Err(CpError::InvalidInput(format!(
                    "entry {i} has non-finite score {score}"
                )));
            }
            if !weight.is_finite() || *weight < 0.0 {
                return Err(CpError::InvalidInput(format!(
                    "entry {i} has invalid weight {weight}"
                )));
            }
        }
        if !infinity_weight.is_finite() || infinity_weight < 0.0 {
            return Err(CpError::InvalidInput(format!(
                "invalid infinity weight {infinity_weight}"
            )));
        }
        let total = compensated_sum(entries.iter().map(|(_, w)| *w)) + infinity_weight;
        if total <= 0.0 {
            return Err(CpError::InvalidInput(
                "total weight must be positive".into(),
            ));
        }
        Ok(Self {
            entries,
            infinity_weight,
        })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn infinity_weight(&self) -> f64 {
        self.infinity_weight
    }
}

/// Smallest finite score whose cumulative normalized weight reaches `level`,
/// or `+inf` when the finite atoms alone cannot reach it.
///
/// The quantile is taken over the atomic empirical distribution exactly (no
/// interpolation); atoms sharing a score are accumulated together before the
/// level test so that ties behave as a single atom.
pub fn weighted_quantile(bag: &WeightedScoreBag, level: f64) -> Result<f64> {
    if !(level.is_finite() && level > 0.0 && level < 1.0) {
        return Err(CpError::InvalidInput(format!(
            "quantile level must lie in (0, 1), got {level}"
        )));
    }
    let total = compensated_sum(bag.entries.iter().map(|(_, w)| *w)) + bag.infinity_weight;
    let target = level * total;

    let mut order: Vec<usize> = (0..bag.entries.len()).collect();
    order.sort_unstable_by(|&a, &b| bag.entries[a].0.total_cmp(&bag.entries[b].0));

    let mut cum = CompensatedSum::default();
    let mut i = 0;
    while i < order.len() {
        let score = bag.entries[order[i]].0;
        // Fold in the whole tie group before testing the level.
        while i < order.len() && bag.entries[order[i]].0 == score {
            cum.add(bag.entries[order[i]].1);
            i += 1;
        }
        if cum.value() >= target {
            return Ok(score);
        }
    }
    Ok(f64::INFINITY)
}

/// Split-conformal threshold: the `ceil((1 - alpha) * (n + 1))`-th smallest
/// calibration score, or `+inf` when that rank exceeds `n`.
///
/// Agrees with [`weighted_quantile`] under uniform weights `1/(n+1)` with one
/// share on the `+inf` atom.
pub fn cp_threshold(cal_scores: &[f64], alpha: MiscoverageLevel) -> Result<f64> {
    if cal_scores.is_empty() {
        return Err(CpError::InvalidInput(
            "calibration score set is empty".into(),
        ));
    }
    if let Some(v) = cal_scores.iter().find(|v| !v.is_finite()) {
        return Err(CpError::InvalidInput(format!(
            "calibration score is not finite: {v}"
        )));
    }
    let n = cal_scores.len();
    let rank = ((1.0 - alpha.value()) * (n as f64 + 1.0)).ceil() as usize;
    if rank > n {
        return Ok(f64::INFINITY);
    }
    let mut sorted = cal_scores.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[rank.max(1) - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(entries: &[(f64, f64)], inf: f64) -> WeightedScoreBag {
        WeightedScoreBag::new(entries.to_vec(), inf).unwrap()
    }

    #[test]
    fn single_finite_atom_meets_level_exactly() {
        let b = bag(&[(5.0, 0.5)], 0.5);
        assert_eq!(weighted_quantile(&b, 0.5).unwrap(), 5.0);
    }

    #[test]
    fn five_atom_cdf_by_hand() {
        // Cumulative mass 0.2/0.4/0.6/0.8 over scores 1..4, 0.2 at infinity.
        let b = bag(&[(1.0, 0.2), (2.0, 0.2), (3.0, 0.2), (4.0, 0.2)], 0.2);
        assert_eq!(weighted_quantile(&b, 0.8).unwrap(), 4.0);
        assert_eq!(weighted_quantile(&b, 0.95).unwrap(), f64::INFINITY);
    }

    #[test]
    fn tie_group_counts_as_one_atom() {
        let b = bag(&[(1.0, 0.25), (1.0, 0.25), (2.0, 0.25)], 0.25);
        assert_eq!(weighted_quantile(&b, 0.4).unwrap(), 1.0);
        assert_eq!(weighted_quantile(&b, 0.6).unwrap(), 2.0);
    }

    #[test]
    fn bag_rejects_bad_inputs() {
        assert!(WeightedScoreBag::new(vec![(f64::NAN, 1.0)], 0.0).is_err());
        assert!(WeightedScoreBag::new(vec![(1.0, -0.1)], 0.0).is_err());
        assert!(WeightedScoreBag::new(vec![(1.0, 0.0)], 0.0).is_err());
        assert!(WeightedScoreBag::new(vec![], 0.0).is_err());
    }

    #[test]
    fn quantile_rejects_bad_level() {
        let b = bag(&[(0.0, 1.0)], 0.0);
        assert!(weighted_quantile(&b, 0.0).is_err());
        assert!(weighted_quantile(&b, 1.0).is_err());
        assert!(weighted_quantile(&b, f64::NAN).is_err());
    }

    #[test]
    fn cp_threshold_examples() {
        let alpha = |a| MiscoverageLevel::new(a).unwrap();
        let scores = [0.1, 0.2, 0.3, 0.4];
        // ceil(0.8 * 5) = 4th smallest.
        assert_eq!(cp_threshold(&scores, alpha(0.2)).unwrap(), 0.4);
        // ceil(0.95 * 5) = 5 > 4.
        assert_eq!(cp_threshold(&scores, alpha(0.05)).unwrap(), f64::INFINITY);
        // ceil(0.4 * 2) = 1st smallest.
        assert_eq!(cp_threshold(&[7.0], alpha(0.6)).unwrap(), 7.0);
    }

    #[test]
    fn cp_threshold_rejects_empty_and_non_finite() {
        let alpha = MiscoverageLevel::new(0.1).unwrap();
        assert!(cp_threshold(&[], alpha).is_err());
        assert!(cp_threshold(&[1.0, f64::INFINITY], alpha).is_err());
    }
}
