use crate::{RatioMetaError, Result};

/// Which ratio estimator the training loop targets: context pairs or a
/// context against a uniform mixture of a context subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    Pairwise,
    Mixture,
}

impl EstimatorMode {
    pub fn tag(self) -> &'static str {
        match self {
            EstimatorMode::Pairwise => "pairwise",
            EstimatorMode::Mixture => "mixture",
        }
    }
}

/// Meta-training hyperparameters. `pairs_per_iteration` is the number of
/// context tasks summed into one optimizer step; `examples_per_context`
/// caps the per-side batch size D.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub pairs_per_iteration: usize,
    pub examples_per_context: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn defaults(mode: EstimatorMode, seed: u64) -> Self {
        Self {
            learning_rate: match mode {
                EstimatorMode::Pairwise => 1e-3,
                EstimatorMode::Mixture => 5e-3,
            },
            weight_decay: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            pairs_per_iteration: 8,
            examples_per_context: 64,
            max_epochs: 200,
            early_stop_patience: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(RatioMetaError::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(RatioMetaError::InvalidInput(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if self.adam_beta1 >= 1.0 || self.adam_beta2 >= 1.0 {
            return Err(RatioMetaError::InvalidInput(
                "adam momentum factors must lie below 1".into(),
            ));
        }
        if self.pairs_per_iteration == 0
            || self.examples_per_context == 0
            || self.max_epochs == 0
            || self.early_stop_patience == 0
        {
            return Err(RatioMetaError::InvalidInput(
                "iteration counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// First/second moment accumulators and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update with decoupled weight decay: the decay
/// term `lr * weight_decay * theta` is applied alongside the moment update
/// rather than entering the moment accumulators, so a zero gradient shrinks
/// parameters by exactly `lr * weight_decay * theta`.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, config: &TrainConfig) {
    debug_assert_eq!(params.len(), grad.len());
    debug_assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let bc1 = 1.0 - config.adam_beta1.powi(state.step as i32);
    let bc2 = 1.0 - config.adam_beta2.powi(state.step as i32);
    for i in 0..params.len() {
        state.m[i] = config.adam_beta1 * state.m[i] + (1.0 - config.adam_beta1) * grad[i];
        state.v[i] = config.adam_beta2 * state.v[i] + (1.0 - config.adam_beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -=
            config.learning_rate * (m_hat / (v_hat.sqrt() + config.adam_eps) + config.weight_decay * params[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> TrainConfig {
        TrainConfig::defaults(EstimatorMode::Pairwise, 0)
    }

    #[test]
    fn zero_gradient_shrinks_by_weight_decay_only() {
        let cfg = config();
        let before = vec![0.5, -2.0, 1e-3];
        let mut params = before.clone();
        let mut state = AdamState::new(3);
        adam_step(&mut params, &[0.0; 3], &mut state, &cfg);
        for (p, b) in params.iter().zip(&before) {
            let delta = p - b;
            assert!(
                (delta + cfg.learning_rate * cfg.weight_decay * b).abs() <= 1e-12,
                "delta {delta} is not pure weight decay"
            );
        }
    }

    #[test]
    fn constant_gradient_step_magnitude_approaches_learning_rate() {
        let mut cfg = config();
        cfg.weight_decay = 0.0;
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        for _ in 0..10 {
            let before = params[0];
            adam_step(&mut params, &[1.0], &mut state, &cfg);
            let step = (params[0] - before).abs();
            assert!(
                (step - cfg.learning_rate).abs() < 1e-6,
                "step {step} should approach the learning rate"
            );
        }
    }

    #[test]
    fn step_counter_increments_once_per_call() {
        let cfg = config();
        let mut params = vec![1.0];
        let mut state = AdamState::new(1);
        for expect in 1..=5 {
            adam_step(&mut params, &[0.3], &mut state, &cfg);
            assert_eq!(state.step_count(), expect);
        }
    }

    #[test]
    fn config_validation_rejects_nonpositive_fields() {
        let mut cfg = config();
        assert!(cfg.validate().is_ok());
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = config();
        cfg.weight_decay = -1e-3;
        assert!(cfg.validate().is_err());
        let mut cfg = config();
        cfg.pairs_per_iteration = 0;
        assert!(cfg.validate().is_err());
    }
}
