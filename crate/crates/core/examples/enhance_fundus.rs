//! Enhance a fundus photograph: Lab lightness, CLAHE, optional gamma, resize.
//! Writes the result and prints the fidelity against the original lightness.
//!
//! `cargo run --example enhance_fundus [input.png] [output.png]`

use std::path::PathBuf;

use amdnet::preprocess::*;
use amdnet::quality::fidelity;
use amdnet::synthetic::{fundus, FundusStyle};

fn main() -> amdnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let img = match args.next() {
        Some(p) => load_rgb(PathBuf::from(p))?,
        None => fundus(
            256,
            FundusStyle {
                haze: 0.5,
                ..FundusStyle::healthy()
            },
            1,
        ),
    };
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("enhanced.png"));

    let config = EnhanceConfig {
        gamma_enabled: true,
        gamma: 1.2,
        ..EnhanceConfig::default()
    };
    let enhanced = enhance_pipeline(&img, &config)?;
    println!("stages: {}", enhanced.stages.join(" -> "));

    let n = config.output_size;
    let before = resize(&channel_extract(&rgb_to_lab(&img)?, 0)?, n, n)?;
    let scores = fidelity(&before, &enhanced.image)?;
    let spread = histogram_distance(&histogram(&before)?, &histogram(&enhanced.image)?);
    println!(
        "mse {:.2}  psnr {} dB  ssim {:.4}  histogram L1 shift {spread:.3}",
        scores.mse,
        amdnet::quality::format_psnr(scores.psnr),
        scores.ssim
    );
    save_png(&enhanced.image, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
