use context_select::ContextRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{RatioMetaError, Result};

/// Ratio exponents are clamped to this magnitude before exponentiation, so
/// every ratio lies in `[e^-30, e^30]`. The clamp only bites far outside the
/// trained region, where a raw exponent would overflow early in training.
pub const RATIO_EXPONENT_CLAMP: f64 = 30.0;

/// Network shape: an input layer into `hidden_width`, `hidden_layers` square
/// hidden layers, and a scalar linear output, ReLU between affine maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchMeta {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub activation: String,
}

impl Default for ArchMeta {
    fn default() -> Self {
        Self {
            hidden_width: 64,
            hidden_layers: 4,
            activation: "relu".into(),
        }
    }
}

impl ArchMeta {
    pub fn with_size(hidden_width: usize, hidden_layers: usize) -> Self {
        Self {
            hidden_width,
            hidden_layers,
            ..Self::default()
        }
    }
}

/// Per-feature z-score statistics over the meta-training pool. Zero-variance
/// features are stored with unit deviation so they pass through unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn from_rows<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]> + Clone) -> Result<Self> {
        let mut count = 0usize;
        let mut mean = vec![0.0; dim];
        for row in rows.clone() {
            if row.len() != dim {
                return Err(RatioMetaError::InvalidInput(format!(
                    "normalization row has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
        if count == 0 {
            return Err(RatioMetaError::InvalidInput(
                "normalization pool is empty".into(),
            ));
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((v, m), acc) in row.iter().zip(&mean).zip(var.iter_mut()) {
                let d = v - m;
                *acc += d * d;
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.mean.len() != dim || self.std.len() != dim {
            return Err(RatioMetaError::InvalidInput(
                "normalization dimension mismatch".into(),
            ));
        }
        if self.mean.iter().any(|v| !v.is_finite())
            || self.std.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(RatioMetaError::InvalidInput(
                "normalization statistics must be finite with positive deviations".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Affine {
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Affine {
    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.out_dim {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = self.bias[r];
            for (w, v) in row.iter().zip(input) {
                acc += w * v;
            }
            out.push(acc);
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// The shared scalar network together with its input normalization. A
/// trained model is immutable and can be evaluated concurrently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    pub(crate) format_version: u32,
    pub(crate) input_dim: usize,
    pub(crate) arch: ArchMeta,
    pub(crate) norm: FeatureNorm,
    pub(crate) layers: Vec<Affine>,
}

pub(crate) struct ForwardCache {
    /// Layer inputs: `acts[0]` is the normalized input, `acts[l]` feeds layer `l`.
    pub(crate) acts: Vec<Vec<f64>>,
    /// Pre-activation outputs of every layer.
    pub(crate) pre: Vec<Vec<f64>>,
    pub(crate) output: f64,
}

impl RatioModel {
    /// Fan-in-scaled uniform initialization, deterministic in `seed`.
    pub fn init(input_dim: usize, arch: ArchMeta, seed: u64) -> Result<Self> {
        if input_dim == 0 || arch.hidden_width == 0 {
            return Err(RatioMetaError::InvalidInput(
                "input dimension and hidden width must be positive".into(),
            ));
        }
        if arch.activation != "relu" {
            return Err(RatioMetaError::InvalidInput(format!(
                "unsupported activation tag '{}'",
                arch.activation
            )));
        }
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat(arch.hidden_width).take(arch.hidden_layers + 1));
        dims.push(1);

        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|d| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                let bias = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
                Affine {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weights,
                    bias,
                }
            })
            .collect();

        Ok(Self {
            format_version: crate::CHECKPOINT_FORMAT_VERSION,
            input_dim,
            arch,
            norm: FeatureNorm::identity(input_dim),
            layers,
        })
    }

    pub fn set_normalization(&mut self, norm: FeatureNorm) -> Result<()> {
        norm.validate(self.input_dim)?;
        self.norm = norm;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn arch(&self) -> &ArchMeta {
        &self.arch
    }

    pub fn normalization(&self) -> &FeatureNorm {
        &self.norm
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Affine::param_count).sum()
    }

    /// Flat parameter view: per layer, weights row-major then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(RatioMetaError::InvalidInput(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w_len = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + w_len]);
            offset += w_len;
            let b_len = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + b_len]);
            offset += b_len;
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, x: &[f64], c: &[f64]) -> Result<ForwardCache> {
        if x.len() + c.len() != self.input_dim {
            return Err(RatioMetaError::InvalidInput(format!(
                "input dimension {} + {} does not match model dimension {}",
                x.len(),
                c.len(),
                self.input_dim
            )));
        }
        let mut input = Vec::with_capacity(self.input_dim);
        input.extend_from_slice(x);
        input.extend_from_slice(c);
        for ((v, m), s) in input.iter_mut().zip(&self.norm.mean).zip(&self.norm.std) {
            *v = (*v - m) / s;
        }

        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(input);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(acts.last().expect("activation stack is nonempty"), &mut z);
            pre.push(z.clone());
            if l < last {
                for v in &mut z {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                acts.push(z);
            }
        }
        let output = pre[last][0];
        if !output.is_finite() {
            return Err(RatioMetaError::Numeric(format!(
                "network output is not finite: {output}"
            )));
        }
        Ok(ForwardCache { acts, pre, output })
    }

    /// Accumulate `d(output)/d(theta) * upstream` into `grad` (flat layout).
    pub(crate) fn backward(&self, cache: &ForwardCache, upstream: f64, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.param_count());
        let mut delta = vec![upstream];

        // Parameter offsets of each layer in the flat layout.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.acts[l];
            let base = offsets[l];
            for r in 0..layer.out_dim {
                let d = delta[r];
                if d != 0.0 {
                    let row = &mut grad[base + r * layer.in_dim..base + (r + 1) * layer.in_dim];
                    for (g, v) in row.iter_mut().zip(input) {
                        *g += d * v;
                    }
                }
                grad[base + layer.out_dim * layer.in_dim + r] += d;
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for r in 0..layer.out_dim {
                    let d = delta[r];
                    if d != 0.0 {
                        let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += d * w;
                        }
                    }
                }
                // ReLU gate from the previous layer's pre-activation.
                for (p, z) in prev.iter_mut().zip(&cache.pre[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Scalar potential of `(x, c)`; ratio estimates are exponentials of
    /// potential differences.
    pub fn log_potential(&self, x: &[f64], c: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(x, c)?.output)
    }

    /// Likelihood-ratio estimate between two contexts:
    /// `exp(clamp(g(x, c1) - g(x, c2)))`, strictly positive and finite.
    pub fn pairwise_ratio(&self, x: &[f64], c1: &[f64], c2: &[f64]) -> Result<f64> {
        let d = self.log_potential(x, c1)? - self.log_potential(x, c2)?;
        Ok(d.clamp(-RATIO_EXPONENT_CLAMP, RATIO_EXPONENT_CLAMP).exp())
    }

    /// Likelihood-ratio estimate of context `c1` against the uniform mixture
    /// of `others`: the second potential is the mean over the set, summed in
    /// ascending context-id order so any permutation of `others` produces a
    /// bit-identical result.
    pub fn mixture_ratio(
        &self,
        x: &[f64],
        c1: &ContextRecord,
        others: &[ContextRecord],
    ) -> Result<f64> {
        let sorted = sorted_members(c1, others)?;
        let own = self.log_potential(x, &c1.features)?;
        let mut sum = 0.0;
        for member in &sorted {
            sum += self.log_potential(x, &member.features)?;
        }
        let d = own - sum / sorted.len() as f64;
        Ok(d.clamp(-RATIO_EXPONENT_CLAMP, RATIO_EXPONENT_CLAMP).exp())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(RatioMetaError::InvalidInput("model has no layers".into()));
        }
        self.norm.validate(self.input_dim)?;
        let mut expect_in = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim != expect_in
                || layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.bias.len() != layer.out_dim
            {
                return Err(RatioMetaError::InvalidInput(format!(
                    "layer {i} has inconsistent dimensions"
                )));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(RatioMetaError::InvalidInput(format!(
                    "layer {i} contains non-finite parameters"
                )));
            }
            expect_in = layer.out_dim;
        }
        if expect_in != 1 {
            return Err(RatioMetaError::InvalidInput(
                "output layer must be scalar".into(),
            ));
        }
        Ok(())
    }
}

/// Members of a mixture slot, sorted by id, rejecting duplicates and the
/// presence of the first-slot context itself.
pub(crate) fn sorted_members<'a>(
    c1: &ContextRecord,
    others: &'a [ContextRecord],
) -> Result<Vec<&'a ContextRecord>> {
    if others.is_empty() {
        return Err(RatioMetaError::InvalidInput(
            "mixture context set is empty".into(),
        ));
    }
    let mut sorted: Vec<&ContextRecord> = others.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in sorted.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(RatioMetaError::InvalidInput(format!(
                "duplicate context '{}' in mixture set",
                pair[0].id
            )));
        }
    }
    if sorted.iter().any(|m| m.id == c1.id) {
        return Err(RatioMetaError::InvalidInput(format!(
            "context '{}' appears on both sides of the mixture ratio",
            c1.id
        )));
    }
    Ok(sorted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model(seed: u64) -> RatioModel {
        RatioModel::init(4, ArchMeta::with_size(8, 2), seed).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut model = small_model(1);
        let zeros = vec![0.0; model.param_count()];
        model.set_params_flat(&zeros).unwrap();
        let g = model.log_potential(&[0.3, -0.4], &[1.0, 2.0]).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn forward_is_deterministic() {
        let model = small_model(7);
        let a = model.log_potential(&[0.1, 0.2], &[0.3, 0.4]).unwrap();
        let b = model.log_potential(&[0.1, 0.2], &[0.3, 0.4]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weights_propagate_output_bias() {
        // With all weights zero only biases flow: hidden biases are ReLU'd
        // but multiply into zero output weights, so the output equals the
        // output-layer bias.
        let mut model = small_model(3);
        let mut flat = vec![0.0; model.param_count()];
        let b = -0.75;
        let n = flat.len();
        flat[n - 1] = b;
        model.set_params_flat(&flat).unwrap();
        assert_eq!(model.log_potential(&[5.0, -2.0], &[0.0, 1.0]).unwrap(), b);
    }

    #[test]
    fn identical_contexts_give_unit_ratio() {
        let model = small_model(11);
        let c = [0.5, -1.0];
        let r = model.pairwise_ratio(&[0.2, 0.9], &c, &c).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn ratios_stay_in_clamped_range() {
        let mut model = small_model(13);
        // Blow up the parameters to force the clamp.
        let flat: Vec<f64> = model.params_flat().iter().map(|v| v * 1e6).collect();
        model.set_params_flat(&flat).unwrap();
        let r = model
            .pairwise_ratio(&[3.0, -2.0], &[9.0, 0.0], &[-9.0, 4.0])
            .unwrap();
        assert!(r >= (-RATIO_EXPONENT_CLAMP).exp() && r <= RATIO_EXPONENT_CLAMP.exp());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = small_model(5);
        assert!(model.log_potential(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn mixture_singleton_reduces_to_pairwise() {
        let model = small_model(17);
        let c1 = ContextRecord::new("a", vec![0.0, 1.0]).unwrap();
        let c2 = ContextRecord::new("b", vec![1.0, 0.0]).unwrap();
        let x = [0.4, -0.1];
        let mixture = model.mixture_ratio(&x, &c1, std::slice::from_ref(&c2)).unwrap();
        let pairwise = model.pairwise_ratio(&x, &c1.features, &c2.features).unwrap();
        assert_eq!(mixture, pairwise);
    }

    #[test]
    fn mixture_is_permutation_invariant_bitwise() {
        let model = small_model(19);
        let c1 = ContextRecord::new("te", vec![0.2, 0.3]).unwrap();
        let members: Vec<ContextRecord> = (0..5)
            .map(|i| ContextRecord::new(format!("m{i}"), vec![i as f64, 1.0 - i as f64]).unwrap())
            .collect();
        let x = [1.0, -1.0];
        let base = model.mixture_ratio(&x, &c1, &members).unwrap();
        let mut reversed = members.clone();
        reversed.reverse();
        assert_eq!(model.mixture_ratio(&x, &c1, &reversed).unwrap(), base);
        let mut rotated = members.clone();
        rotated.rotate_left(2);
        assert_eq!(model.mixture_ratio(&x, &c1, &rotated).unwrap(), base);
    }

    #[test]
    fn mixture_rejects_empty_and_overlapping_sets() {
        let model = small_model(23);
        let c1 = ContextRecord::new("a", vec![0.0, 1.0]).unwrap();
        assert!(model.mixture_ratio(&[0.0, 0.0], &c1, &[]).is_err());
        let overlap = [c1.clone()];
        assert!(model.mixture_ratio(&[0.0, 0.0], &c1, &overlap).is_err());
    }

    #[test]
    fn matched_potentials_give_unit_mixture_ratio() {
        // Members whose features equal c1's produce a zero exponent.
        let model = small_model(29);
        let c1 = ContextRecord::new("a", vec![0.4, 0.6]).unwrap();
        let members = [
            ContextRecord::new("b", vec![0.4, 0.6]).unwrap(),
            ContextRecord::new("c", vec![0.4, 0.6]).unwrap(),
        ];
        assert_eq!(model.mixture_ratio(&[0.1, 0.2], &c1, &members).unwrap(), 1.0);
    }
}
