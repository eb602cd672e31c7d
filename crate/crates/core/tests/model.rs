mod common;

use amdnet::data::TensorDataset;
use amdnet::kernels::softmax_cross_entropy;
use amdnet::model::*;
use amdnet::Tensor;

#[test]
fn forward_shapes_at_256() {
    let spec = ModelSpec {
        block_filters: vec![2, 2, 2, 2, 2, 2],
        lstm_units: 4,
        ..ModelSpec::default()
    };
    let (state, trace) = build_model(&spec, 0).unwrap();
    assert_eq!(trace.rows.len(), 23);
    assert_eq!(spec.timesteps(), 16);
    let batch = Tensor::from_fn(&[1, 256, 256, 3], |i| (i % 7) as f64 / 7.0);
    let logits = state.forward_infer(&batch).unwrap();
    assert_eq!(logits.shape(), [1, 4]);
}

#[test]
fn untrained_loss_is_near_uniform() {
    let spec = ModelSpec::reduced(64, [4, 4, 8, 8, 8, 8], 8);
    let (images, labels) = amdnet::synthetic::synthetic_class_set(2, 64, 1);
    let data = TensorDataset::new(common::to_input(&images), labels).unwrap();
    let (state, _) = build_model(&spec, 5).unwrap();
    let eval = evaluate(&state, &data, 8).unwrap();
    assert!((eval.loss - 4f64.ln()).abs() < 0.1, "{}", eval.loss);
}

#[test]
fn one_small_step_lowers_the_loss() {
    let spec = ModelSpec {
        dropout_rate: 0.0,
        ..ModelSpec::reduced(64, [4, 4, 8, 8, 8, 8], 8)
    };
    let (mut state, _) = build_model(&spec, 2).unwrap();
    let (images, labels) = amdnet::synthetic::synthetic_class_set(2, 64, 4);
    let batch = common::to_input(&images);
    let onehot = amdnet::data::one_hot(&labels, 4).unwrap();
    let loss = |s: &ModelState| {
        let mut s = s.clone();
        let (logits, _) = s.forward_train(&batch, 0).unwrap();
        softmax_cross_entropy(&logits, &onehot).unwrap().0
    };
    let before = loss(&state);
    let (logits, cache) = state.clone().forward_train(&batch, 0).unwrap();
    let (_, d) = softmax_cross_entropy(&logits, &onehot).unwrap();
    let grads = state.backward(&cache, &d).unwrap();
    let schedule = LrSchedule {
        initial: 1e-4,
        ..LrSchedule::default()
    };
    adam_step(&mut state, &grads, &schedule, 0).unwrap();
    assert!(loss(&state) < before);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let spec = ModelSpec::reduced(64, [4, 4, 4, 4, 4, 4], 4);
    let (state, _) = build_model(&spec, 9).unwrap();
    let bytes = encode_checkpoint(&state).unwrap();
    let back = decode_checkpoint(&bytes).unwrap();
    let batch = Tensor::from_fn(&[2, 64, 64, 3], |i| ((i * 31) % 17) as f64 / 17.0);
    assert_eq!(
        state.forward_infer(&batch).unwrap(),
        back.forward_infer(&batch).unwrap()
    );
    assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
}

#[test]
fn training_is_deterministic_in_process() {
    let spec = ModelSpec::reduced(64, [4, 4, 4, 4, 4, 4], 4);
    let (images, labels) = amdnet::synthetic::synthetic_class_set(3, 64, 8);
    let data = TensorDataset::new(common::to_input(&images), labels).unwrap();
    let config = TrainConfig {
        epochs: 2,
        batch_size: 5,
        augment: false,
        seed: 11,
        ..TrainConfig::default()
    };
    let run = || {
        let (mut s, _) = build_model(&spec, 11).unwrap();
        let h = fit(&mut s, &data, None, &config).unwrap();
        (h.to_csv(), encode_checkpoint(&s).unwrap())
    };
    assert_eq!(run(), run());
}
