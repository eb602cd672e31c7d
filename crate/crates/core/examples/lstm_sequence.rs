//! Run the LSTM over a short sequence and show gate activity per step.
//!
//! `cargo run --example lstm_sequence`

use amdnet::lstm::{lstm_cell_step, lstm_sequence_forward, LstmParams, LstmState};
use amdnet::Tensor;
use rand::SeedableRng;

fn main() -> amdnet::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let (steps, input, hidden) = (5, 3, 4);
    let params = LstmParams::init(input, hidden, &mut rng);
    println!("{} parameters", params.param_count());

    // a ramp that switches sign halfway
    let x = Tensor::from_fn(&[1, steps, input], |i| {
        let t = (i / input) as f64;
        if t < 2.5 {
            0.5 * t
        } else {
            -0.5 * t
        }
    });

    let mut state = LstmState::zeros(1, hidden);
    for t in 0..steps {
        let x_t = Tensor::new(&[1, input], x.data()[t * input..(t + 1) * input].to_vec())?;
        let (next, cache) = lstm_cell_step(&x_t, &state, &params)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "t={t}  input {:.2}  forget {:.2}  output {:.2}  h {:?}",
            mean(cache.input_gate()),
            mean(cache.forget_gate()),
            mean(cache.output_gate()),
            next.h
                .data()
                .iter()
                .map(|v| (v * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        );
        state = next;
    }

    let (all, _) = lstm_sequence_forward(&x, &params, None)?;
    let last = &all.data()[(steps - 1) * hidden..];
    assert_eq!(last, state.h.data());
    println!("sequence forward agrees with stepping");
    Ok(())
}
