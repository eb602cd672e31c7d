//! Deterministic synthetic images for tests, examples and smoke runs.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::data::ClassLabel;
use crate::error::{Error, Result};
use crate::preprocess::{save_png, ColorSpace, ImageU8};
use crate::seed;

const STREAM_FIXTURE: u64 = 101;

/// Filled gray disk of `value` on black, centred.
pub fn disk(size: usize, radius: f64, value: u8) -> ImageU8 {
    let c = (size as f64 - 1.0) / 2.0;
    ImageU8::from_fn(size, size, ColorSpace::Gray, |x, y| {
        let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
        [if d2 <= radius * radius { value } else { 0 }]
    })
    .expect("valid dims")
}

/// Mean filter over a `k x k` window with replicated borders; `k` odd.
pub fn box_blur(img: &ImageU8, k: usize) -> ImageU8 {
    let r = (k / 2) as isize;
    let (w, h, c) = img.dims();
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0.0f64; w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let s: f64 = (-r..=r)
                    .map(|d| img.data()[(y * w + clampi(x as isize + d, w)) * c + ch] as f64)
                    .sum();
                rows[(y * w + x) * c + ch] = s;
            }
        }
    }
    let norm = (k * k) as f64;
    let mut out = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let s: f64 = (-r..=r)
                    .map(|d| rows[(clampi(y as isize + d, h) * w + x) * c + ch])
                    .sum();
                out.push((s / norm).round() as u8);
            }
        }
    }
    ImageU8::new(w, h, img.space(), out).expect("same shape")
}

/// Uniform random gray image.
pub fn random_gray(width: usize, height: usize, seed: u64) -> ImageU8 {
    let mut rng = seed::stream(seed, &[STREAM_FIXTURE, 0]);
    let data = (0..width * height).map(|_| rng.random()).collect();
    ImageU8::new(width, height, ColorSpace::Gray, data).expect("valid dims")
}

/// Smooth gray texture: a few random sinusoids plus mild noise, values kept
/// away from both ends of the range.
pub fn textured_gray(width: usize, height: usize, seed: u64) -> ImageU8 {
    let mut rng = seed::stream(seed, &[STREAM_FIXTURE, 1]);
    let waves: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            [
                rng.random_range(0.02..0.25),
                rng.random_range(0.02..0.25),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(10.0..40.0),
            ]
        })
        .collect();
    let base: f64 = rng.random_range(90.0..160.0);
    ImageU8::from_fn(width, height, ColorSpace::Gray, |x, y| {
        let v: f64 = waves
            .iter()
            .map(|[fx, fy, ph, amp]| amp * (fx * x as f64 + fy * y as f64 + ph).sin())
            .sum::<f64>()
            + base
            + rng.random_range(-6.0..6.0);
        [v.round().clamp(1.0, 253.0) as u8]
    })
    .expect("valid dims")
}

/// Parameters of a fundus-like RGB image.
#[derive(Debug, Clone, Copy)]
pub struct FundusStyle {
    /// Bright round lesions inside the macula region.
    pub drusen: usize,
    /// Small dark-red spots scattered over the retina.
    pub hemorrhages: usize,
    /// Milky veil strength in `[0, 1]`.
    pub haze: f64,
}

impl FundusStyle {
    pub fn healthy() -> Self {
        Self {
            drusen: 0,
            hemorrhages: 0,
            haze: 0.0,
        }
    }

    pub fn for_class(label: ClassLabel) -> Self {
        match label {
            ClassLabel::Amd => Self {
                drusen: 7,
                ..Self::healthy()
            },
            ClassLabel::Cataract => Self {
                haze: 0.6,
                ..Self::healthy()
            },
            ClassLabel::Diabetes => Self {
                hemorrhages: 14,
                ..Self::healthy()
            },
            ClassLabel::Normal => Self::healthy(),
        }
    }
}

fn blend(dst: &mut [f64; 3], src: [f64; 3], alpha: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *d * (1.0 - alpha) + s * alpha;
    }
}

/// Orange retina disc on black with an optic disc, a vessel tree and
/// style-dependent lesions.
pub fn fundus(size: usize, style: FundusStyle, seed: u64) -> ImageU8 {
    let mut rng = seed::stream(seed, &[STREAM_FIXTURE, 2]);
    let s = size as f64;
    let c = (s - 1.0) / 2.0;
    let radius = s * rng.random_range(0.42..0.46);
    let disc = (
        c + s * rng.random_range(0.16..0.22),
        c + s * rng.random_range(-0.04..0.04),
        s * 0.06,
    );
    let macula = (c - s * 0.05, c + s * rng.random_range(-0.02..0.02));
    // Vessels: arcs leaving the optic disc, as (angle, curvature, width).
    let vessels: Vec<(f64, f64, f64)> = (0..6)
        .map(|i| {
            let base = std::f64::consts::PI * (0.55 + 0.18 * i as f64);
            (
                base + rng.random_range(-0.15..0.15),
                rng.random_range(-0.006..0.006) * 256.0 / s,
                s * rng.random_range(0.008..0.014),
            )
        })
        .collect();
    let spot = |rng: &mut rand_chacha::ChaCha8Rng, spread: f64, around: (f64, f64)| {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let d = spread * rng.random::<f64>().sqrt();
        (
            around.0 + d * a.cos(),
            around.1 + d * a.sin(),
            s * rng.random_range(0.012..0.025),
        )
    };
    let drusen: Vec<_> = (0..style.drusen)
        .map(|_| spot(&mut rng, s * 0.12, macula))
        .collect();
    let hemorrhages: Vec<_> = (0..style.hemorrhages)
        .map(|_| spot(&mut rng, radius * 0.8, (c, c)))
        .collect();
    let noise_seed = rng.random::<u64>();
    let mut noise = seed::stream(noise_seed, &[]);
    ImageU8::from_fn(size, size, ColorSpace::Rgb, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let r = ((fx - c).powi(2) + (fy - c).powi(2)).sqrt();
        if r > radius {
            return [0, 0, 0];
        }
        let vignette = 1.0 - 0.35 * (r / radius).powi(2);
        let mut px = [190.0 * vignette, 85.0 * vignette, 35.0 * vignette];
        let dm = ((fx - macula.0).powi(2) + (fy - macula.1).powi(2)).sqrt();
        blend(
            &mut px,
            [110.0, 40.0, 20.0],
            0.5 * (-(dm / (s * 0.08)).powi(2)).exp(),
        );
        for &(angle, curve, width) in &vessels {
            let (dx, dy) = (fx - disc.0, fy - disc.1);
            let along = dx * angle.cos() + dy * angle.sin();
            if along <= 0.0 {
                continue;
            }
            let across = -dx * angle.sin() + dy * angle.cos() - curve * along * along;
            let w = width * (1.0 - 0.5 * (along / s).min(1.0));
            if across.abs() < w {
                blend(&mut px, [95.0, 20.0, 15.0], 0.8);
            }
        }
        let dd = ((fx - disc.0).powi(2) + (fy - disc.1).powi(2)).sqrt();
        if dd < disc.2 {
            blend(&mut px, [245.0, 220.0, 160.0], 0.9);
        }
        for &(sx, sy, sr) in &drusen {
            if (fx - sx).powi(2) + (fy - sy).powi(2) < sr * sr {
                blend(&mut px, [240.0, 215.0, 120.0], 0.85);
            }
        }
        for &(sx, sy, sr) in &hemorrhages {
            if (fx - sx).powi(2) + (fy - sy).powi(2) < sr * sr * 0.6 {
                blend(&mut px, [70.0, 5.0, 5.0], 0.9);
            }
        }
        blend(&mut px, [200.0, 190.0, 180.0], style.haze);
        let n = noise.random_range(-4.0..4.0);
        px.map(|v| (v + n).round().clamp(0.0, 255.0) as u8)
    })
    .expect("valid dims")
}

/// `per_class` fundus-like images of every class, in class order.
pub fn synthetic_class_set(per_class: usize, size: usize, seed: u64) -> (Vec<ImageU8>, Vec<usize>) {
    let mut images = Vec::with_capacity(per_class * 4);
    let mut labels = Vec::with_capacity(per_class * 4);
    for label in ClassLabel::ALL {
        for i in 0..per_class {
            let s = seed::derive_seed(seed, &[label.index() as u64, i as u64]);
            images.push(fundus(size, FundusStyle::for_class(label), s));
            labels.push(label.index());
        }
    }
    (images, labels)
}

/// Writes `root/<Class>/<class>_<i>.png` for every class.
pub fn write_synthetic_dataset(
    root: &Path,
    per_class: usize,
    size: usize,
    seed: u64,
) -> Result<()> {
    let (images, labels) = synthetic_class_set(per_class, size, seed);
    for (i, (img, &label)) in images.iter().zip(&labels).enumerate() {
        let class =
            ClassLabel::from_index(label).ok_or_else(|| Error::Validation(label.to_string()))?;
        let dir = root.join(class.name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let name = format!(
            "{}_{:04}.png",
            class.name().to_lowercase(),
            i % per_class.max(1)
        );
        save_png(img, dir.join(name))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        let a = fundus(64, FundusStyle::for_class(ClassLabel::Amd), 3);
        assert_eq!(a, fundus(64, FundusStyle::for_class(ClassLabel::Amd), 3));
        assert_ne!(a, fundus(64, FundusStyle::for_class(ClassLabel::Amd), 4));
        assert_eq!(textured_gray(20, 10, 1), textured_gray(20, 10, 1));
    }

    #[test]
    fn blur_keeps_constants() {
        let img = ImageU8::filled(9, 7, ColorSpace::Rgb, &[10, 20, 30]).unwrap();
        assert_eq!(box_blur(&img, 5), img);
        let d = disk(32, 8.0, 200);
        assert_eq!(d.pixel(16, 16)[0], 200);
        assert_eq!(d.pixel(0, 0)[0], 0);
    }
}
