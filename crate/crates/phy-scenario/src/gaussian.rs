//! 1-D Gaussian toy scenario with closed-form densities and ratios,
//! exercising the same calibration machinery as the link scenario but with
//! every quantity analytically checkable.

use rand::Rng;

use crate::{PhyError, Result};

/// A context under which covariates are drawn from `N(mean, variance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianToyContext {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianToyContext {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance.is_finite() && variance > 0.0) {
            return Err(PhyError::InvalidInput(format!(
                "gaussian context needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn features(&self) -> Vec<f64> {
        vec![self.mean, self.variance]
    }
}

/// One standard normal draw via Box-Muller (the sine variate is discarded).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn sample<R: Rng + ?Sized>(context: &GaussianToyContext, rng: &mut R) -> f64 {
    context.mean + context.variance.sqrt() * standard_normal(rng)
}

pub fn log_density(context: &GaussianToyContext, x: f64) -> f64 {
    let d = x - context.mean;
    -0.5 * (d * d / context.variance + (std::f64::consts::TAU * context.variance).ln())
}

pub fn density(context: &GaussianToyContext, x: f64) -> f64 {
    log_density(context, x).exp()
}

/// Exact density ratio `p(x | c1) / p(x | c2)`.
pub fn ratio(x: f64, c1: &GaussianToyContext, c2: &GaussianToyContext) -> f64 {
    (log_density(c1, x) - log_density(c2, x)).exp()
}
