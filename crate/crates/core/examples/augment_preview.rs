//! Draw a few seeded augmentations of one image and write them side by side.
//!
//! `cargo run --example augment_preview [out.png]`

use std::path::PathBuf;

use amdnet::augment::{augment_sample, AugmentConfig};
use amdnet::preprocess::{save_png, ColorSpace, ImageU8};
use amdnet::synthetic::{fundus, FundusStyle};

fn main() -> amdnet::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("augment.png"));
    let img = fundus(96, FundusStyle::healthy(), 3);
    let config = AugmentConfig::default();
    let seed = 2024;

    let views: Vec<ImageU8> = (0..4)
        .map(|epoch| augment_sample(&img, &config, seed, epoch, 0))
        .collect();
    // same seed, epoch and index always give the same view
    assert_eq!(views[1], augment_sample(&img, &config, seed, 1, 0));

    let strip = ImageU8::from_fn(96 * 5, 96, ColorSpace::Rgb, |x, y| {
        let src = if x < 96 { &img } else { &views[x / 96 - 1] };
        let p = src.pixel(x % 96, y);
        [p[0], p[1], p[2]]
    })?;
    save_png(&strip, &out)?;
    println!(
        "original + 4 epochs of augmentation written to {}",
        out.display()
    );
    Ok(())
}
