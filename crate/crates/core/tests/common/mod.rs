//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use amdnet::data::{ImageDataset, TensorDataset};
use amdnet::kernels::*;
use amdnet::lstm::{lstm_backward, lstm_sequence_forward, LstmParams};
use amdnet::model::{build_model, evaluate, train_epoch, ModelSpec, ModelState, TrainConfig};
use amdnet::preprocess::{to_network_input, ColorSpace, EnhanceConfig, ImageU8};
use amdnet::synthetic::{fundus, random_gray, synthetic_class_set, textured_gray, FundusStyle};
use amdnet::{data::BatchSource, data::LoadContext, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
pub const KERNEL_TOLERANCE: f64 = 1e-4;
pub const NETWORK_TOLERANCE: f64 = 1e-3;

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// `sum(out * r)`, whose gradient with respect to `out` is `r`.
fn probe(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn check(f: impl FnMut(&[f64]) -> f64, at: &Tensor, analytic: &Tensor) -> f64 {
    finite_difference_check(f, at.data(), analytic.data(), FD_STEP, None)
}

fn with(shape: &[usize], v: &[f64]) -> Tensor {
    Tensor::new(shape, v.to_vec()).unwrap()
}

/// Largest finite-difference error of every kernel's backward pass, by name.
pub fn kernel_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // convolution
    let x = random_tensor(&[2, 5, 4, 3], &mut rng);
    let w = random_tensor(&[3, 3, 3, 4], &mut rng);
    let b = random_tensor(&[4], &mut rng);
    let r = random_tensor(&[2, 5, 4, 4], &mut rng);
    let g = conv2d_backward(&x, &w, &r).unwrap();
    let e_x = check(
        |v| probe(&conv2d_forward(&with(x.shape(), v), &w, &b).unwrap(), &r),
        &x,
        &g.d_input,
    );
    let e_w = check(
        |v| probe(&conv2d_forward(&x, &with(w.shape(), v), &b).unwrap(), &r),
        &w,
        &g.d_weights,
    );
    let e_b = check(
        |v| probe(&conv2d_forward(&x, &w, &with(b.shape(), v)).unwrap(), &r),
        &b,
        &g.d_bias,
    );
    out.push(("conv2d", e_x.max(e_w).max(e_b)));

    // max pooling: gradient routed to the argmax
    let x = random_tensor(&[2, 4, 6, 3], &mut rng);
    let r = random_tensor(&[2, 2, 3, 3], &mut rng);
    let pooled = maxpool2d_forward(&x).unwrap();
    let d = maxpool2d_backward(&r, &pooled.argmax, x.shape()).unwrap();
    out.push((
        "maxpool2d",
        check(
            |v| probe(&maxpool2d_forward(&with(x.shape(), v)).unwrap().output, &r),
            &x,
            &d,
        ),
    ));

    // batch norm, train phase
    let x = random_tensor(&[3, 2, 2, 4], &mut rng);
    let gamma = random_tensor(&[4], &mut rng);
    let beta = random_tensor(&[4], &mut rng);
    let r = random_tensor(&[3, 2, 2, 4], &mut rng);
    let bn = |x: &Tensor, g: &Tensor, b: &Tensor| {
        let mut stats = RunningStats::new(4);
        batch_norm_forward_train(x, g, b, &mut stats).unwrap()
    };
    let (_, cache) = bn(&x, &gamma, &beta);
    let (dx, dg, db) = batch_norm_backward(&cache, &gamma, &r).unwrap();
    let e_x = check(
        |v| probe(&bn(&with(x.shape(), v), &gamma, &beta).0, &r),
        &x,
        &dx,
    );
    let e_g = check(|v| probe(&bn(&x, &with(&[4], v), &beta).0, &r), &gamma, &dg);
    let e_b = check(|v| probe(&bn(&x, &gamma, &with(&[4], v)).0, &r), &beta, &db);
    out.push(("batch_norm", e_x.max(e_g).max(e_b)));

    // dense
    let x = random_tensor(&[3, 5], &mut rng);
    let w = random_tensor(&[5, 4], &mut rng);
    let b = random_tensor(&[4], &mut rng);
    let r = random_tensor(&[3, 4], &mut rng);
    let g = dense_backward(&x, &w, &r).unwrap();
    let e_x = check(
        |v| probe(&dense_forward(&with(x.shape(), v), &w, &b).unwrap(), &r),
        &x,
        &g.d_input,
    );
    let e_w = check(
        |v| probe(&dense_forward(&x, &with(w.shape(), v), &b).unwrap(), &r),
        &w,
        &g.d_weights,
    );
    let e_b = check(
        |v| probe(&dense_forward(&x, &w, &with(b.shape(), v)).unwrap(), &r),
        &b,
        &g.d_bias,
    );
    out.push(("dense", e_x.max(e_w).max(e_b)));

    // activations; ReLU inputs are kept away from the kink
    for (name, kind) in [
        ("relu", Activation::Relu),
        ("sigmoid", Activation::Sigmoid),
        ("tanh", Activation::Tanh),
        ("softmax", Activation::Softmax),
    ] {
        let x = Tensor::from_fn(&[3, 4], |_| {
            let v: f64 = rng.random_range(0.1..2.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        });
        let r = random_tensor(&[3, 4], &mut rng);
        let y = activation_forward(kind, &x);
        let d = activation_backward(kind, &x, &y, &r).unwrap();
        out.push((
            name,
            check(
                |v| probe(&activation_forward(kind, &with(x.shape(), v)), &r),
                &x,
                &d,
            ),
        ));
    }

    // dropout with a fixed mask is linear
    let x = random_tensor(&[4, 6], &mut rng);
    let r = random_tensor(&[4, 6], &mut rng);
    let (_, mask) = dropout_forward(&x, 0.3, 17, Phase::Train).unwrap();
    let d = dropout_backward(&r, mask.as_ref()).unwrap();
    out.push((
        "dropout",
        check(
            |v| {
                probe(
                    &dropout_forward(&with(x.shape(), v), 0.3, 17, Phase::Train)
                        .unwrap()
                        .0,
                    &r,
                )
            },
            &x,
            &d,
        ),
    ));

    // softmax cross-entropy
    let logits = random_tensor(&[3, 4], &mut rng);
    let labels = Tensor::new(
        &[3, 4],
        vec![0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1.],
    )
    .unwrap();
    let (_, d) = softmax_cross_entropy(&logits, &labels).unwrap();
    out.push((
        "softmax_cross_entropy",
        check(
            |v| softmax_cross_entropy(&with(&[3, 4], v), &labels).unwrap().0,
            &logits,
            &d,
        ),
    ));

    // LSTM BPTT on two instance sizes
    let mut worst: f64 = 0.0;
    for (n, t, dim, u) in [(2, 3, 4, 5), (1, 2, 2, 2)] {
        worst = worst.max(lstm_error(n, t, dim, u, &mut rng));
    }
    out.push(("lstm_bptt", worst));
    out
}

fn lstm_error(n: usize, t: usize, d: usize, u: usize, rng: &mut ChaCha8Rng) -> f64 {
    let x = random_tensor(&[n, t, d], rng);
    let mut params = LstmParams::init(d, u, rng);
    for b in params.tensors_mut() {
        *b = random_tensor(b.shape(), rng);
    }
    let r = random_tensor(&[n, t, u], rng);
    let (_, cache) = lstm_sequence_forward(&x, &params, None).unwrap();
    let (dx, grads) = lstm_backward(&cache, &params, &r).unwrap();
    let mut worst = check(
        |v| {
            probe(
                &lstm_sequence_forward(&with(x.shape(), v), &params, None)
                    .unwrap()
                    .0,
                &r,
            )
        },
        &x,
        &dx,
    );
    for k in 0..8 {
        let at = params.tensors()[k].clone();
        let analytic = grads.tensors()[k].clone();
        let e = check(
            |v| {
                let mut p = params.clone();
                *p.tensors_mut()[k] = with(at.shape(), v);
                probe(&lstm_sequence_forward(&x, &p, None).unwrap().0, &r)
            },
            &at,
            &analytic,
        );
        worst = worst.max(e);
    }
    worst
}

/// Reduced network for the composed gradient check: six pooling stages need
/// an input that is a multiple of 64, and 128 leaves a 2x2 grid, so the LSTM
/// runs over four steps.
pub fn gradient_check_spec() -> ModelSpec {
    ModelSpec {
        fc_units: 12,
        ..ModelSpec::reduced(128, [4, 4, 8, 8, 8, 8], 16)
    }
}

/// End-to-end check of the composed backward pass over `per_tensor`
/// coordinates of every parameter tensor. Returns `(max error, coords)`.
pub fn composed_gradient_error(per_tensor: usize, seed: u64) -> (f64, usize) {
    let spec = gradient_check_spec();
    let (state, _) = build_model(&spec, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = 2;
    let batch = Tensor::from_fn(&[n, spec.input_size, spec.input_size, 3], |_| rng.random());
    let labels = Tensor::new(&[n, 4], vec![1., 0., 0., 0., 0., 0., 1., 0.]).unwrap();
    let dropout_seed = 99;
    let loss_of = |s: &ModelState| {
        let mut s = s.clone();
        let (logits, cache) = s.forward_train(&batch, dropout_seed).unwrap();
        (softmax_cross_entropy(&logits, &labels).unwrap(), cache)
    };
    let ((_, d_logits), cache) = loss_of(&state);
    let grads = state.backward(&cache, &d_logits).unwrap();
    let analytic = grads.flatten();
    let params = state.params.flatten();
    // pick coordinates inside every tensor so each layer type is exercised
    let mut coords = Vec::new();
    let mut offset = 0;
    for (i, t) in state.params.tensors().iter().enumerate() {
        for c in sample_coords(t.len(), per_tensor, seed + i as u64) {
            coords.push(offset + c);
        }
        offset += t.len();
    }
    let err = finite_difference_check(
        |v| {
            let mut s = state.clone();
            s.params.assign_flat(v).unwrap();
            loss_of(&s).0 .0
        },
        &params,
        &analytic,
        FD_STEP,
        Some(&coords),
    );
    (err, coords.len())
}

/// Natural-looking gray fixtures of assorted sizes.
pub fn gray_corpus(count: usize, seed: u64) -> Vec<ImageU8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let w = rng.random_range(12..90);
            let h = rng.random_range(12..90);
            match i % 3 {
                0 => random_gray(w, h, seed + i as u64),
                1 => textured_gray(w, h, seed + i as u64),
                _ => {
                    let img = fundus(w.max(h), FundusStyle::healthy(), seed + i as u64);
                    amdnet::preprocess::luminance(&img).unwrap()
                }
            }
        })
        .collect()
}

/// Fundus fixtures covering every class style.
pub fn fundus_corpus(size: usize, seed: u64) -> Vec<ImageU8> {
    synthetic_class_set(2, size, seed).0
}

pub fn gray(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> ImageU8 {
    ImageU8::from_fn(w, h, ColorSpace::Gray, |x, y| [f(x, y)]).unwrap()
}

/// The reduced model used for the overfit check. Dropout is off: it is a
/// regularizer, and the variance it adds ahead of each batch norm keeps the
/// running statistics from matching inference on a 40-image set.
pub fn overfit_spec() -> ModelSpec {
    ModelSpec {
        dropout_rate: 0.0,
        ..ModelSpec::reduced(64, [8, 16, 32, 64, 128, 256], 128)
    }
}

/// 40 enhanced synthetic images (10 per class) at the model's input size.
pub fn overfit_dataset(spec: &ModelSpec, seed: u64) -> TensorDataset {
    let (images, labels) = synthetic_class_set(10, 128, seed);
    let enhance = EnhanceConfig {
        output_size: spec.input_size,
        ..Default::default()
    };
    let ds =
        ImageDataset::from_images(images, labels.clone(), enhance, Default::default()).unwrap();
    let ctx = LoadContext::inference();
    let all: Vec<usize> = (0..ds.len()).collect();
    let batch = ds.load(&all, &ctx).unwrap();
    TensorDataset::new(batch.images, labels).unwrap()
}

pub struct OverfitOutcome {
    pub epochs: usize,
    pub accuracy: f64,
    pub losses: Vec<f64>,
}

/// Trains until inference-phase accuracy on the training set reaches 1.0 or
/// `max_epochs` pass.
pub fn run_overfit(max_epochs: usize, seed: u64) -> OverfitOutcome {
    let spec = overfit_spec();
    let data = overfit_dataset(&spec, seed);
    let (mut state, _) = build_model(&spec, seed).unwrap();
    let config = TrainConfig {
        augment: false,
        seed,
        ..TrainConfig::default()
    };
    let mut losses = Vec::new();
    let mut accuracy = 0.0;
    for epoch in 0..max_epochs {
        let record = train_epoch(&mut state, &data, &config).unwrap();
        losses.push(record.train_loss);
        accuracy = evaluate(&state, &data, config.batch_size).unwrap().accuracy;
        if accuracy == 1.0 {
            return OverfitOutcome {
                epochs: epoch + 1,
                accuracy,
                losses,
            };
        }
    }
    OverfitOutcome {
        epochs: max_epochs,
        accuracy,
        losses,
    }
}

pub fn to_input(images: &[ImageU8]) -> Tensor {
    to_network_input(images).unwrap()
}

/// Input Size cells of the 23-row architecture table at input 256.
pub const TABLE_CELLS: [&str; 23] = [
    "256 X 256 X 3",
    "256 X 256 X 32",
    "256 X 256 X 32",
    "128 X 128 X 32",
    "128 X 128 X 64",
    "128 X 128 X 64",
    "64 X 64 X 64",
    "64 X 64 X 128",
    "64 X 64 X 128",
    "32 X 32 X 128",
    "32 X 32 X 256",
    "32 X 32 X 256",
    "16 X 16 X 256",
    "16 X 16 X 512",
    "16 X 16 X 512",
    "16 X 16 X 512",
    "8 X 8 X 512",
    "8 X 8 X 512",
    "8 X 8 X 512",
    "8 X 8 X 512",
    "16 X 512",
    "524352",
    "260",
];

/// The published 4-class test confusion matrix (rows actual, columns
/// predicted, order AMD, Cataract, Diabetes, Normal).
pub const PUBLISHED_COUNTS: [[u64; 4]; 4] =
    [[98, 1, 1, 0], [1, 99, 0, 0], [3, 0, 93, 4], [1, 0, 3, 96]];

/// Textbook global histogram equalization, written independently of the
/// CLAHE code: `round(255 * cdf(v) / N)`.
pub fn brute_force_equalize(img: &ImageU8) -> ImageU8 {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let n = img.data().len() as f64;
    let mut cdf = 0u64;
    let mut map = [0u8; 256];
    for v in 0..256 {
        cdf += hist[v];
        map[v] = (255.0 * cdf as f64 / n).round() as u8;
    }
    let data = img.data().iter().map(|&v| map[v as usize]).collect();
    ImageU8::new(img.width(), img.height(), ColorSpace::Gray, data).unwrap()
}

/// SSIM fixture `i`; the matching reference values come from
/// `tests/oracles/reference_values.py`.
pub fn ssim_fixture(i: usize) -> (ImageU8, ImageU8) {
    let (w, h) = (24 + 5 * i, 20 + 3 * i);
    let a = gray(w, h, |x, y| {
        ((3 * x * x + 5 * x * y + y * y + 11 * i) % 256) as u8
    });
    let b = gray(w, h, |x, y| {
        let v = a.pixel(x, y)[0] as i64;
        if i.is_multiple_of(2) {
            (255 - v) as u8
        } else {
            (v + ((7 * x + 13 * y + 3 * i) % 41) as i64 - 20).clamp(0, 255) as u8
        }
    });
    (a, b)
}

pub const SSIM_REFERENCE: [f64; 10] = [
    -0.986515492500564,
    0.9881450832786061,
    -0.9809793367780694,
    0.9877748171391356,
    -0.9828560172607912,
    0.9876364913058674,
    -0.9790302100957575,
    0.9878625811131998,
    -0.9780766689662217,
    0.98785336941513,
];

/// A small, fast configuration for end-to-end CLI runs.
pub const SMALL_RUN_TOML: &str = r#"
[dataset]
test_fraction = 0.25

[model]
input_size = 64
block_filters = [4, 4, 8, 8, 8, 8]
lstm_units = 8
fc_units = 16

[train]
epochs = 2
batch_size = 8
"#;

/// Runs the CLI in-process; returns the exit code.
pub fn run_cli(args: &[&str]) -> i32 {
    let argv = std::iter::once("amdnet").chain(args.iter().copied());
    amdnet::cli::run(argv).expect("cli run")
}

/// A synthetic `per_class`-per-class manifest that never touches disk.
pub fn synthetic_manifest(per_class: usize) -> amdnet::data::Manifest {
    use amdnet::data::{ClassLabel, GateDecision, Manifest, ManifestEntry};
    let entries = ClassLabel::ALL
        .iter()
        .flat_map(|&label| {
            (0..per_class).map(move |i| ManifestEntry {
                path: format!(
                    "{}/{}_{i:04}.png",
                    label.name(),
                    label.name().to_lowercase()
                )
                .into(),
                label,
                decision: GateDecision::Accept,
                source: "synthetic".into(),
            })
        })
        .collect();
    Manifest { entries }
}
