//! Compare hand-written backward passes with central differences.
//!
//! `cargo run --example gradient_check`

use amdnet::kernels::{
    conv2d_backward, conv2d_forward, finite_difference_check, softmax_cross_entropy,
};
use amdnet::model::{build_model, ModelSpec};
use amdnet::Tensor;
use rand::{Rng, SeedableRng};

fn main() -> amdnet::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut random = |shape: &[usize]| Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0));

    // A single convolution, loss = sum(output).
    let x = random(&[1, 6, 6, 2]);
    let w = random(&[3, 3, 2, 3]);
    let b = random(&[3]);
    let ones = Tensor::from_fn(&[1, 6, 6, 3], |_| 1.0);
    let grads = conv2d_backward(&x, &w, &ones)?;
    let err = finite_difference_check(
        |v| {
            let w = Tensor::new(w.shape(), v.to_vec()).unwrap();
            conv2d_forward(&x, &w, &b).unwrap().data().iter().sum()
        },
        w.data(),
        grads.d_weights.data(),
        1e-6,
        None,
    );
    println!("conv2d weights: max relative error {err:.2e}");

    // The whole network at a reduced width, through the loss.
    let spec = ModelSpec::reduced(128, [4, 4, 8, 8, 8, 8], 8);
    let (state, _) = build_model(&spec, 1)?;
    let batch = random(&[2, 128, 128, 3]);
    let labels = Tensor::new(&[2, 4], vec![0., 1., 0., 0., 0., 0., 0., 1.])?;
    let loss = |s: &amdnet::model::ModelState| {
        let mut s = s.clone();
        let (logits, cache) = s.forward_train(&batch, 3).unwrap();
        (softmax_cross_entropy(&logits, &labels).unwrap(), cache)
    };
    let ((value, d_logits), cache) = loss(&state);
    let analytic = state.backward(&cache, &d_logits)?.flatten();
    let coords = amdnet::kernels::sample_coords(analytic.len(), 30, 5);
    let err = finite_difference_check(
        |v| {
            let mut s = state.clone();
            s.params.assign_flat(v).unwrap();
            loss(&s).0 .0
        },
        &state.params.flatten(),
        &analytic,
        1e-6,
        Some(&coords),
    );
    println!(
        "network (loss {value:.4}, {} params): max relative error {err:.2e} over {} coords",
        analytic.len(),
        coords.len()
    );
    Ok(())
}
