//! Set-construction engine for conformal calibration.
//!
//! Everything in this crate is a pure function over explicit inputs:
//! nonconformity scores, (weighted) empirical quantiles, split-conformal
//! thresholds, weighted conformal sets under covariate shift, top-k sets,
//! randomized majority-vote combination, and the total-variation estimate
//! used to derate the miscoverage level conservatively.
//!
//! Scores are negatively oriented throughout: smaller means a better fit,
//! and a prediction set collects every label whose score is `<=` a
//! threshold (ties included).

mod error;
mod quantile;
mod score;
mod sets;
mod shift;

pub use error::CpError;
pub use quantile::{cp_threshold, weighted_quantile, WeightedScoreBag};
pub use score::{MiscoverageLevel, PredictionSet, ScoreVector};
pub use sets::{build_set, majority_vote, top_k_set, wcp_set};
pub use shift::{ccp_adjust, estimate_tv};

pub type Result<T> = std::result::Result<T, CpError>;

/// Compensated accumulator (Kahan-Neumaier). Likelihood-ratio weights can
/// span many orders of magnitude, so plain accumulation loses small atoms.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}
