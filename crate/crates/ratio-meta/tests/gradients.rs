//! Central-finite-difference oracle for the analytic loss gradients.

use context_select::ContextRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use ratio_meta::{
    mixture_loss_and_grad, pairwise_loss_and_grad, ArchMeta, LabeledPairBatch, RatioModel,
};

const FD_STEP: f64 = 1e-4;
const REL_TOL: f64 = 1e-4;

fn batch(dim: usize, per_side: usize, seed: u64) -> LabeledPairBatch {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    for z in [true, false] {
        for _ in 0..per_side {
            items.push(((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(), z));
        }
    }
    LabeledPairBatch::new(items).unwrap()
}

fn assert_grad_matches(
    analytic: &[f64],
    mut loss_at: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    label: &str,
) {
    let mut probe = params.to_vec();
    for i in 0..params.len() {
        probe[i] = params[i] + FD_STEP;
        let plus = loss_at(&probe);
        probe[i] = params[i] - FD_STEP;
        let minus = loss_at(&probe);
        probe[i] = params[i];
        let fd = (plus - minus) / (2.0 * FD_STEP);
        let diff = (analytic[i] - fd).abs();
        let scale = analytic[i].abs().max(fd.abs());
        assert!(
            diff <= REL_TOL * scale || diff <= 1e-8,
            "{label}: coordinate {i} analytic {} vs finite difference {fd}",
            analytic[i]
        );
    }
}

#[test]
fn pairwise_gradient_matches_central_differences() {
    // 193 parameters: comfortably under the 500-parameter budget that keeps
    // the finite-difference sweep fast.
    let mut model = RatioModel::init(4, ArchMeta::with_size(8, 2), 99).unwrap();
    assert!(model.param_count() <= 500);
    let b = batch(2, 6, 7);
    let c1 = [0.5, -0.5];
    let c2 = [-1.0, 1.0];
    let params = model.params_flat();
    let (_, analytic) = pairwise_loss_and_grad(&model, &b, &c1, &c2).unwrap();
    assert_grad_matches(
        &analytic,
        |p| {
            model.set_params_flat(p).unwrap();
            let (loss, _) = pairwise_loss_and_grad(&model, &b, &c1, &c2).unwrap();
            loss
        },
        &params,
        "pairwise",
    );
}

#[test]
fn mixture_gradient_matches_central_differences() {
    let mut model = RatioModel::init(4, ArchMeta::with_size(8, 2), 101).unwrap();
    assert!(model.param_count() <= 500);
    let b = batch(2, 6, 8);
    let c1 = ContextRecord::new("te", vec![0.3, 0.7]).unwrap();
    let others = vec![
        ContextRecord::new("a", vec![-0.2, 1.1]).unwrap(),
        ContextRecord::new("b", vec![0.9, -0.4]).unwrap(),
        ContextRecord::new("c", vec![-1.3, 0.2]).unwrap(),
    ];
    let params = model.params_flat();
    let (_, analytic) = mixture_loss_and_grad(&model, &b, &c1, &others).unwrap();
    assert_grad_matches(
        &analytic,
        |p| {
            model.set_params_flat(p).unwrap();
            let (loss, _) = mixture_loss_and_grad(&model, &b, &c1, &others).unwrap();
            loss
        },
        &params,
        "mixture",
    );
}

#[test]
fn separable_toy_data_drives_loss_toward_zero() {
    use ratio_meta::{adam_step, AdamState, EstimatorMode, TrainConfig};

    // Two points on opposite sides of the origin, perfectly separable.
    let model = RatioModel::init(2, ArchMeta::with_size(8, 1), 5).unwrap();
    let mut model = model;
    let b = LabeledPairBatch::new(vec![(vec![2.0], true), (vec![-2.0], false)]).unwrap();
    let c1 = [1.0];
    let c2 = [-1.0];
    let mut cfg = TrainConfig::defaults(EstimatorMode::Pairwise, 0);
    cfg.learning_rate = 0.05;
    cfg.weight_decay = 0.0;
    let mut params = model.params_flat();
    let mut adam = AdamState::new(params.len());
    let (first, _) = pairwise_loss_and_grad(&model, &b, &c1, &c2).unwrap();
    let mut last = first;
    for _ in 0..400 {
        let (loss, grad) = pairwise_loss_and_grad(&model, &b, &c1, &c2).unwrap();
        last = loss;
        adam_step(&mut params, &grad, &mut adam, &cfg);
        model.set_params_flat(&params).unwrap();
    }
    assert!(last < first * 0.05, "loss {last} did not shrink from {first}");
    assert!(last < 0.1, "separable data should be nearly fit, loss {last}");
}
