use std::collections::{BTreeMap, BTreeSet};

use context_select::ContextRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::loss::{
    mixture_loss, mixture_loss_and_grad, pairwise_loss, pairwise_loss_and_grad, LabeledPairBatch,
};
use crate::model::{ArchMeta, FeatureNorm, RatioModel};
use crate::optim::{adam_step, AdamState, EstimatorMode, TrainConfig};
use crate::{RatioMetaError, Result};

const STREAM_INIT: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_VAL: u64 = 3;
const STREAM_EPOCH: u64 = 4;

fn stream(seed: u64, tag: u64) -> ChaCha12Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&tag.to_le_bytes());
    ChaCha12Rng::from_seed(bytes)
}

/// Indices of `count` draws from a pool of size `pool`: without replacement
/// when the pool suffices, with replacement otherwise.
fn draw_indices(pool: usize, count: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    if pool >= count {
        let mut ids: Vec<usize> = (0..pool).collect();
        for i in 0..count {
            let j = rng.random_range(i..pool);
            ids.swap(i, j);
        }
        ids.truncate(count);
        ids
    } else {
        (0..count).map(|_| rng.random_range(0..pool)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Task {
    Pair { c1: usize, c2: usize },
    Mix { c1: usize, members: Vec<usize> },
}

struct TrainSetup<'a> {
    ids: Vec<&'a str>,
    contexts: Vec<&'a ContextRecord>,
    data: Vec<&'a [Vec<f64>]>,
    /// Per-context sample indices reserved for training / for validation.
    train_pool: Vec<Vec<usize>>,
    held_pool: Vec<Vec<usize>>,
}

impl<'a> TrainSetup<'a> {
    fn batch(
        &self,
        task: &Task,
        pools: &[Vec<usize>],
        d: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<(LabeledPairBatch, Task)> {
        let mut items = Vec::with_capacity(2 * d);
        match task {
            Task::Pair { c1, c2 } => {
                for idx in draw_indices(pools[*c1].len(), d, rng) {
                    items.push((self.data[*c1][pools[*c1][idx]].clone(), true));
                }
                for idx in draw_indices(pools[*c2].len(), d, rng) {
                    items.push((self.data[*c2][pools[*c2][idx]].clone(), false));
                }
            }
            Task::Mix { c1, members } => {
                for idx in draw_indices(pools[*c1].len(), d, rng) {
                    items.push((self.data[*c1][pools[*c1][idx]].clone(), true));
                }
                // Split D over the members: floor share each, the remainder
                // spread over the leading members so the batch stays balanced.
                let k = members.len();
                let base = d / k;
                let extra = d % k;
                for (rank, member) in members.iter().enumerate() {
                    let count = base + usize::from(rank < extra);
                    for idx in draw_indices(pools[*member].len(), count, rng) {
                        items.push((self.data[*member][pools[*member][idx]].clone(), false));
                    }
                }
            }
        }
        Ok((LabeledPairBatch::new(items)?, task.clone()))
    }

    fn loss_and_grad(
        &self,
        model: &RatioModel,
        batch: &LabeledPairBatch,
        task: &Task,
    ) -> Result<(f64, Vec<f64>)> {
        match task {
            Task::Pair { c1, c2 } => pairwise_loss_and_grad(
                model,
                batch,
                &self.contexts[*c1].features,
                &self.contexts[*c2].features,
            ),
            Task::Mix { c1, members } => {
                let records: Vec<ContextRecord> =
                    members.iter().map(|m| self.contexts[*m].clone()).collect();
                mixture_loss_and_grad(model, batch, self.contexts[*c1], &records)
            }
        }
    }

    fn loss(&self, model: &RatioModel, batch: &LabeledPairBatch, task: &Task) -> Result<f64> {
        match task {
            Task::Pair { c1, c2 } => pairwise_loss(
                model,
                batch,
                &self.contexts[*c1].features,
                &self.contexts[*c2].features,
            ),
            Task::Mix { c1, members } => {
                let records: Vec<ContextRecord> =
                    members.iter().map(|m| self.contexts[*m].clone()).collect();
                mixture_loss(model, batch, self.contexts[*c1], &records)
            }
        }
    }
}

fn sample_tasks(
    n: usize,
    mode: EstimatorMode,
    count: usize,
    eligible: Option<&[usize]>,
    rng: &mut ChaCha12Rng,
) -> Vec<Task> {
    let universe: Vec<usize> = match eligible {
        Some(e) => e.to_vec(),
        None => (0..n).collect(),
    };
    let u = universe.len();
    let mut seen = BTreeSet::new();
    let mut tasks = Vec::new();
    let mut attempts = 0usize;
    let limit = 200 * count.max(1);
    while tasks.len() < count && attempts < limit {
        attempts += 1;
        let task = match mode {
            EstimatorMode::Pairwise => {
                let a = rng.random_range(0..u);
                let mut b = rng.random_range(0..u - 1);
                if b >= a {
                    b += 1;
                }
                Task::Pair {
                    c1: universe[a],
                    c2: universe[b],
                }
            }
            EstimatorMode::Mixture => {
                let a = rng.random_range(0..u);
                let hi = (u - 1).min(5);
                let lo = hi.min(2);
                let size = rng.random_range(lo..=hi);
                let mut others: Vec<usize> =
                    universe.iter().copied().filter(|&i| i != universe[a]).collect();
                for i in 0..size {
                    let j = rng.random_range(i..others.len());
                    others.swap(i, j);
                }
                others.truncate(size);
                others.sort_unstable();
                Task::Mix {
                    c1: universe[a],
                    members: others,
                }
            }
        };
        if seen.insert(task.clone()) {
            tasks.push(task);
        }
    }
    tasks
}

/// Meta-train the shared potential network over the contexts of
/// `covariates`, returning a model whose normalization statistics were
/// computed once over the whole pool before training.
///
/// Each epoch samples `pairs_per_iteration` context tasks without
/// replacement, draws a balanced batch per task, and applies one Adam step
/// on the summed loss. Training stops at `max_epochs` or when the loss on a
/// held-out tenth of the samples has not improved for
/// `early_stop_patience` consecutive epochs; the best-scoring parameters
/// are restored. Identical inputs and seed yield a bit-identical model.
pub fn meta_train(
    covariates: &BTreeMap<String, Vec<Vec<f64>>>,
    contexts: &BTreeMap<String, ContextRecord>,
    mode: EstimatorMode,
    config: &TrainConfig,
) -> Result<RatioModel> {
    config.validate()?;
    if covariates.len() < 2 {
        return Err(RatioMetaError::InvalidInput(format!(
            "meta-training needs at least 2 contexts, got {}",
            covariates.len()
        )));
    }

    let mut setup = TrainSetup {
        ids: Vec::new(),
        contexts: Vec::new(),
        data: Vec::new(),
        train_pool: Vec::new(),
        held_pool: Vec::new(),
    };
    let mut x_dim = None;
    let mut c_dim = None;
    for (id, samples) in covariates {
        let record = contexts.get(id).ok_or_else(|| {
            RatioMetaError::InvalidInput(format!("no context record for dataset '{id}'"))
        })?;
        if samples.is_empty() {
            return Err(RatioMetaError::InvalidInput(format!(
                "dataset for context '{id}' is empty"
            )));
        }
        for x in samples {
            match x_dim {
                None => x_dim = Some(x.len()),
                Some(d) if d != x.len() => {
                    return Err(RatioMetaError::InvalidInput(format!(
                        "covariate dimension mismatch in context '{id}'"
                    )))
                }
                _ => {}
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(RatioMetaError::InvalidInput(format!(
                    "non-finite covariate in context '{id}'"
                )));
            }
        }
        match c_dim {
            None => c_dim = Some(record.features.len()),
            Some(d) if d != record.features.len() => {
                return Err(RatioMetaError::InvalidInput(format!(
                    "context feature dimension mismatch at '{id}'"
                )))
            }
            _ => {}
        }
        setup.ids.push(id);
        setup.contexts.push(record);
        setup.data.push(samples);
    }
    let x_dim = x_dim.expect("at least one sample");
    let c_dim = c_dim.expect("at least one context");
    let input_dim = x_dim + c_dim;
    let n = setup.ids.len();

    // Normalization over the full pool of concatenated (x, c) rows.
    let pool: Vec<Vec<f64>> = setup
        .data
        .iter()
        .zip(&setup.contexts)
        .flat_map(|(samples, record)| {
            samples.iter().map(|x| {
                let mut row = Vec::with_capacity(input_dim);
                row.extend_from_slice(x);
                row.extend_from_slice(&record.features);
                row
            })
        })
        .collect();
    let norm = FeatureNorm::from_rows(input_dim, pool.iter().map(Vec::as_slice))?;

    let mut model = RatioModel::init(
        input_dim,
        ArchMeta::default(),
        stream(config.seed, STREAM_INIT).random(),
    )?;
    model.set_normalization(norm)?;

    // Hold out a tenth of each context for the early-stopping loss.
    let mut rng_split = stream(config.seed, STREAM_SPLIT);
    for samples in &setup.data {
        let len = samples.len();
        let hold = len / 10;
        let mut ids: Vec<usize> = (0..len).collect();
        for i in 0..len {
            let j = rng_split.random_range(i..len);
            ids.swap(i, j);
        }
        setup.held_pool.push(ids[..hold].to_vec());
        setup.train_pool.push(ids[hold..].to_vec());
    }

    // Fixed validation tasks over contexts that actually have held-out data.
    let mut rng_val = stream(config.seed, STREAM_VAL);
    let val_eligible: Vec<usize> = (0..n).filter(|&i| !setup.held_pool[i].is_empty()).collect();
    let val_tasks: Vec<(LabeledPairBatch, Task)> = if val_eligible.len() >= 2 {
        sample_tasks(n, mode, 8, Some(&val_eligible), &mut rng_val)
            .iter()
            .map(|task| setup.batch(task, &setup.held_pool, config.examples_per_context, &mut rng_val))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut params = model.params_flat();
    let mut adam = AdamState::new(params.len());
    let mut rng_epoch = stream(config.seed, STREAM_EPOCH);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0usize;

    for _epoch in 0..config.max_epochs {
        let tasks = sample_tasks(n, mode, config.pairs_per_iteration, None, &mut rng_epoch);
        let mut grad_sum = vec![0.0; params.len()];
        for task in &tasks {
            let (batch, task) =
                setup.batch(task, &setup.train_pool, config.examples_per_context, &mut rng_epoch)?;
            let (_, grad) = setup.loss_and_grad(&model, &batch, &task)?;
            for (g, t) in grad_sum.iter_mut().zip(&grad) {
                *g += t;
            }
        }
        adam_step(&mut params, &grad_sum, &mut adam, config);
        model.set_params_flat(&params)?;

        if !val_tasks.is_empty() {
            let mut val = 0.0;
            for (batch, task) in &val_tasks {
                val += setup.loss(&model, batch, task)?;
            }
            let improved = best.as_ref().map_or(true, |(b, _)| val < *b);
            if improved {
                best = Some((val, params.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.early_stop_patience {
                    break;
                }
            }
        }
    }

    if let Some((_, winner)) = best {
        model.set_params_flat(&winner)?;
    }
    Ok(model)
}
