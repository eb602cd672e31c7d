//! Save a model, load it back and check that predictions do not change.
//!
//! `cargo run --example checkpoint_roundtrip`

use amdnet::model::{build_model, load_checkpoint, predict, save_checkpoint, ModelSpec};
use amdnet::preprocess::{enhance_pipeline, to_network_input, EnhanceConfig};
use amdnet::synthetic::synthetic_class_set;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ModelSpec::reduced(64, [4, 8, 8, 16, 16, 16], 16);
    let (state, _) = build_model(&spec, 12)?;

    let (images, _) = synthetic_class_set(1, 128, 5);
    let enhance = EnhanceConfig {
        output_size: 64,
        ..Default::default()
    };
    let enhanced = images
        .iter()
        .map(|img| enhance_pipeline(img, &enhance).map(|e| e.image))
        .collect::<amdnet::Result<Vec<_>>>()?;
    let batch = to_network_input(&enhanced)?;

    let dir = std::env::temp_dir().join(format!("amdnet-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.amdnet");
    save_checkpoint(&state, &path)?;
    let size = std::fs::metadata(&path)?.len();
    let restored = load_checkpoint(&path)?;

    let before = predict(&state, &batch)?;
    let after = predict(&restored, &batch)?;
    assert_eq!(before.probabilities, after.probabilities);
    println!(
        "{size} bytes, {} parameters, predictions {:?} unchanged",
        state.params.count(),
        after.labels
    );
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
