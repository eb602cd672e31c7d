//! Print the layer table of the full-size network and of a reduced one.
//!
//! `cargo run --example shape_trace [input_size]`

use amdnet::model::ModelSpec;

fn main() -> amdnet::Result<()> {
    let full = ModelSpec::default();
    println!("{}\n", full.shape_trace()?);

    let size = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(64);
    let small = ModelSpec::reduced(size, [8, 16, 32, 64, 128, 256], 128);
    println!("reduced at {size}: {} LSTM steps", small.timesteps());
    println!("{}", small.shape_trace()?);
    Ok(())
}
