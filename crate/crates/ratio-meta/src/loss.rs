use context_select::ContextRecord;

use crate::model::{sorted_members, ForwardCache, RatioModel, RATIO_EXPONENT_CLAMP};
use crate::{RatioMetaError, Result};

/// A balanced binary-classification batch: `z = true` marks covariates drawn
/// under the first context, `z = false` those drawn under the second context
/// (or the mixture over a context set).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPairBatch {
    items: Vec<(Vec<f64>, bool)>,
}

impl LabeledPairBatch {
    pub fn new(items: Vec<(Vec<f64>, bool)>) -> Result<Self> {
        if items.is_empty() {
            return Err(RatioMetaError::InvalidInput("batch is empty".into()));
        }
        let positives = items.iter().filter(|(_, z)| *z).count();
        if positives * 2 != items.len() {
            return Err(RatioMetaError::InvalidInput(format!(
                "batch must be balanced: {positives} of {} items are positive",
                items.len()
            )));
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[(Vec<f64>, bool)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// `log(1 + e^v)` without overflow on either tail.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Per-item cross-entropy under the exponential-difference ratio estimator:
/// `-z log(ratio) + log(1 + ratio)` with `ratio = e^u`, evaluated as
/// `softplus(u)` for negatives and `softplus(-u)` for positives so every
/// term is nonnegative by construction.
fn item_loss(u: f64, z: bool) -> f64 {
    softplus(if z { -u } else { u })
}

/// Gradient of [`item_loss`] w.r.t. the clamped exponent.
fn item_dloss(u: f64, z: bool) -> f64 {
    sigmoid(u) - f64::from(u8::from(z))
}

fn clamp_gate(t: f64) -> f64 {
    if t > -RATIO_EXPONENT_CLAMP && t < RATIO_EXPONENT_CLAMP {
        1.0
    } else {
        0.0
    }
}

fn check_exponent(i: usize, t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(RatioMetaError::Numeric(format!(
            "potential difference for batch item {i} is not finite: {t}"
        )));
    }
    Ok(t.clamp(-RATIO_EXPONENT_CLAMP, RATIO_EXPONENT_CLAMP))
}

/// Cross-entropy loss of the pairwise ratio estimator over a batch, with its
/// exact analytic gradient in the flat parameter layout.
pub fn pairwise_loss_and_grad(
    model: &RatioModel,
    batch: &LabeledPairBatch,
    c1: &[f64],
    c2: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; model.param_count()];
    let mut loss = 0.0;
    for (i, (x, z)) in batch.items().iter().enumerate() {
        let cache1 = model.forward_cached(x, c1)?;
        let cache2 = model.forward_cached(x, c2)?;
        let t = cache1.output - cache2.output;
        let u = check_exponent(i, t)?;
        loss += item_loss(u, *z);
        let upstream = item_dloss(u, *z) * clamp_gate(t);
        model.backward(&cache1, upstream, &mut grad);
        model.backward(&cache2, -upstream, &mut grad);
    }
    finish(loss, grad)
}

/// Forward-only version of [`pairwise_loss_and_grad`].
pub fn pairwise_loss(
    model: &RatioModel,
    batch: &LabeledPairBatch,
    c1: &[f64],
    c2: &[f64],
) -> Result<f64> {
    let mut loss = 0.0;
    for (i, (x, z)) in batch.items().iter().enumerate() {
        let t = model.log_potential(x, c1)? - model.log_potential(x, c2)?;
        loss += item_loss(check_exponent(i, t)?, *z);
    }
    Ok(loss)
}

/// Cross-entropy loss of the mixture ratio estimator (uniform mixture of
/// `others` in the second slot) with its exact analytic gradient.
pub fn mixture_loss_and_grad(
    model: &RatioModel,
    batch: &LabeledPairBatch,
    c1: &ContextRecord,
    others: &[ContextRecord],
) -> Result<(f64, Vec<f64>)> {
    let members = sorted_members(c1, others)?;
    let k = members.len() as f64;
    let mut grad = vec![0.0; model.param_count()];
    let mut loss = 0.0;
    for (i, (x, z)) in batch.items().iter().enumerate() {
        let cache1 = model.forward_cached(x, &c1.features)?;
        let mut caches: Vec<ForwardCache> = Vec::with_capacity(members.len());
        let mut sum = 0.0;
        for member in &members {
            let cache = model.forward_cached(x, &member.features)?;
            sum += cache.output;
            caches.push(cache);
        }
        let t = cache1.output - sum / k;
        let u = check_exponent(i, t)?;
        loss += item_loss(u, *z);
        let upstream = item_dloss(u, *z) * clamp_gate(t);
        model.backward(&cache1, upstream, &mut grad);
        for cache in &caches {
            model.backward(cache, -upstream / k, &mut grad);
        }
    }
    finish(loss, grad)
}

/// Forward-only version of [`mixture_loss_and_grad`].
pub fn mixture_loss(
    model: &RatioModel,
    batch: &LabeledPairBatch,
    c1: &ContextRecord,
    others: &[ContextRecord],
) -> Result<f64> {
    let members = sorted_members(c1, others)?;
    let k = members.len() as f64;
    let mut loss = 0.0;
    for (i, (x, z)) in batch.items().iter().enumerate() {
        let own = model.log_potential(x, &c1.features)?;
        let mut sum = 0.0;
        for member in &members {
            sum += model.log_potential(x, &member.features)?;
        }
        loss += item_loss(check_exponent(i, own - sum / k)?, *z);
    }
    Ok(loss)
}

fn finish(loss: f64, grad: Vec<f64>) -> Result<(f64, Vec<f64>)> {
    if !loss.is_finite() {
        return Err(RatioMetaError::Numeric(format!("loss is not finite: {loss}")));
    }
    debug_assert!(loss >= 0.0, "cross-entropy terms are nonnegative");
    if let Some(g) = grad.iter().find(|g| !g.is_finite()) {
        return Err(RatioMetaError::Numeric(format!(
            "gradient coordinate is not finite: {g}"
        )));
    }
    Ok((loss, grad))
}
