//! Score sharp and progressively blurred images with the contour-based gate.
//!
//! `cargo run --example quality_gate`

use amdnet::quality::{assess_quality, extract_contours, QualityThresholds};
use amdnet::synthetic::{box_blur, disk, fundus, FundusStyle};

fn main() -> amdnet::Result<()> {
    let disk = disk(256, 60.0, 200);
    let set = extract_contours(&disk)?;
    println!(
        "disk: {} contour(s), {} border points, sharpness {:.2}",
        set.contours.len(),
        set.contours.iter().map(|c| c.points.len()).sum::<usize>(),
        set.sharpness
    );

    let thresholds = QualityThresholds::default();
    let img = fundus(256, FundusStyle::healthy(), 7);
    println!(
        "{:>6} {:>10} {:>10} {:>9}  decision",
        "blur", "sharpness", "luminance", "contrast"
    );
    for k in [1, 3, 9, 15] {
        let view = if k == 1 {
            img.clone()
        } else {
            box_blur(&img, k)
        };
        let r = assess_quality(&view, &thresholds);
        println!(
            "{k:>6} {:>10.2} {:>10.1} {:>9.1}  {} {}",
            r.sharpness,
            r.illumination,
            r.contrast,
            r.decision(),
            r.reason_codes()
        );
    }
    Ok(())
}
