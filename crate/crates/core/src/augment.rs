//! Seeded training-time augmentation: flips, color jitter and translation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{hsv_unit_to_rgb, rgb_to_hsv_unit, ColorSpace, ImageU8};
use crate::seed::{self, STREAM_AUGMENT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub p_hflip: f64,
    pub p_vflip: f64,
    /// Brightness offset drawn from `[-d, d]` as a fraction of full scale.
    pub brightness_delta: f64,
    pub contrast_range: [f64; 2],
    pub saturation_range: [f64; 2],
    /// Hue rotation drawn from `[-d, d]` as a fraction of a full turn.
    pub hue_delta: f64,
    /// Translation drawn from `[-f, f]` of each dimension, in whole pixels.
    pub shift_fraction: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p_hflip: 0.5,
            p_vflip: 0.5,
            brightness_delta: 0.1,
            contrast_range: [0.8, 1.2],
            saturation_range: [0.8, 1.2],
            hue_delta: 0.05,
            shift_fraction: 0.1,
        }
    }
}

impl AugmentConfig {
    /// A configuration that leaves every image unchanged.
    pub fn identity() -> Self {
        Self {
            p_hflip: 0.0,
            p_vflip: 0.0,
            brightness_delta: 0.0,
            contrast_range: [1.0, 1.0],
            saturation_range: [1.0, 1.0],
            hue_delta: 0.0,
            shift_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, p) in [("p_hflip", self.p_hflip), ("p_vflip", self.p_vflip)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("augment.{name} must be in [0, 1], got {p}"));
            }
        }
        for (name, d) in [
            ("brightness_delta", self.brightness_delta),
            ("hue_delta", self.hue_delta),
        ] {
            if !(0.0..=1.0).contains(&d) {
                return bad(format!("augment.{name} must be in [0, 1], got {d}"));
            }
        }
        if !(0.0..1.0).contains(&self.shift_fraction) {
            return bad(format!(
                "augment.shift_fraction must be in [0, 1), got {}",
                self.shift_fraction
            ));
        }
        for (name, [lo, hi]) in [
            ("contrast_range", self.contrast_range),
            ("saturation_range", self.saturation_range),
        ] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!(
                    "augment.{name} must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"
                ));
            }
        }
        Ok(())
    }
}

/// One draw of every augmentation parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub hflip: bool,
    pub vflip: bool,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
    pub shift_x: isize,
    pub shift_y: isize,
}

fn symmetric<R: Rng>(rng: &mut R, d: f64) -> f64 {
    rng.random_range(-d..=d)
}

fn max_shift(fraction: f64, dim: usize) -> i64 {
    (fraction * dim as f64).floor() as i64
}

pub fn sample_flips<R: Rng>(rng: &mut R, config: &AugmentConfig) -> (bool, bool) {
    let h = rng.random_bool(config.p_hflip);
    let v = rng.random_bool(config.p_vflip);
    (h, v)
}

pub fn sample_jitter<R: Rng>(rng: &mut R, config: &AugmentConfig) -> [f64; 4] {
    let [clo, chi] = config.contrast_range;
    let [slo, shi] = config.saturation_range;
    [
        symmetric(rng, config.brightness_delta),
        rng.random_range(clo..=chi),
        rng.random_range(slo..=shi),
        symmetric(rng, config.hue_delta),
    ]
}

pub fn sample_shift<R: Rng>(
    rng: &mut R,
    config: &AugmentConfig,
    w: usize,
    h: usize,
) -> (isize, isize) {
    let mx = max_shift(config.shift_fraction, w);
    let my = max_shift(config.shift_fraction, h);
    let dx = rng.random_range(-mx..=mx);
    let dy = rng.random_range(-my..=my);
    (dx as isize, dy as isize)
}

/// Draws parameters in the same order [`augment`] consumes them.
pub fn sample_params<R: Rng>(
    rng: &mut R,
    config: &AugmentConfig,
    w: usize,
    h: usize,
) -> AugmentParams {
    let (hflip, vflip) = sample_flips(rng, config);
    let [brightness, contrast, saturation, hue] = sample_jitter(rng, config);
    let (shift_x, shift_y) = sample_shift(rng, config, w, h);
    AugmentParams {
        hflip,
        vflip,
        brightness,
        contrast,
        saturation,
        hue,
        shift_x,
        shift_y,
    }
}

pub fn flip(img: &ImageU8, horizontal: bool, vertical: bool) -> ImageU8 {
    if !horizontal && !vertical {
        return img.clone();
    }
    let (w, h, c) = img.dims();
    let mut out = img.clone();
    let src = img.data();
    for y in 0..h {
        let sy = if vertical { h - 1 - y } else { y };
        for x in 0..w {
            let sx = if horizontal { w - 1 - x } else { x };
            out.data_mut()[(y * w + x) * c..][..c].copy_from_slice(&src[(sy * w + sx) * c..][..c]);
        }
    }
    out
}

pub fn random_flip<R: Rng>(img: &ImageU8, rng: &mut R, config: &AugmentConfig) -> ImageU8 {
    let (h, v) = sample_flips(rng, config);
    flip(img, h, v)
}

/// Brightness, contrast, saturation then hue. Saturation and hue apply to
/// RGB images only.
pub fn apply_jitter(
    img: &ImageU8,
    brightness: f64,
    contrast: f64,
    saturation: f64,
    hue: f64,
) -> ImageU8 {
    let mut px: Vec<f64> = img
        .data()
        .iter()
        .map(|&v| (v as f64 + brightness * 255.0).clamp(0.0, 255.0))
        .collect();
    if contrast != 1.0 {
        let mean = px.iter().sum::<f64>() / px.len() as f64;
        for v in &mut px {
            *v = ((*v - mean) * contrast + mean).clamp(0.0, 255.0);
        }
    }
    if img.space() == ColorSpace::Rgb && (saturation != 1.0 || hue != 0.0) {
        for p in px.chunks_exact_mut(3) {
            let [h, s, v] = rgb_to_hsv_unit([p[0] / 255.0, p[1] / 255.0, p[2] / 255.0]);
            let rgb = hsv_unit_to_rgb([(h + hue).rem_euclid(1.0), (s * saturation).min(1.0), v]);
            for (dst, c) in p.iter_mut().zip(rgb) {
                *dst = c * 255.0;
            }
        }
    }
    let data = px
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageU8::new(img.width(), img.height(), img.space(), data).expect("same shape")
}

pub fn color_jitter<R: Rng>(img: &ImageU8, rng: &mut R, config: &AugmentConfig) -> ImageU8 {
    let [b, c, s, h] = sample_jitter(rng, config);
    apply_jitter(img, b, c, s, h)
}

/// Translates by whole pixels; vacated pixels become zero.
pub fn shift(img: &ImageU8, dx: isize, dy: isize) -> ImageU8 {
    let (w, h, c) = img.dims();
    let mut out = vec![0u8; img.data().len()];
    for y in 0..h {
        let sy = y as isize - dy;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        for x in 0..w {
            let sx = x as isize - dx;
            if sx < 0 || sx >= w as isize {
                continue;
            }
            let src = (sy as usize * w + sx as usize) * c;
            out[(y * w + x) * c..][..c].copy_from_slice(&img.data()[src..][..c]);
        }
    }
    ImageU8::new(w, h, img.space(), out).expect("same shape")
}

pub fn random_shift<R: Rng>(img: &ImageU8, rng: &mut R, config: &AugmentConfig) -> ImageU8 {
    let (dx, dy) = sample_shift(rng, config, img.width(), img.height());
    shift(img, dx, dy)
}

pub fn apply_params(img: &ImageU8, p: &AugmentParams) -> ImageU8 {
    let flipped = flip(img, p.hflip, p.vflip);
    let jittered = apply_jitter(&flipped, p.brightness, p.contrast, p.saturation, p.hue);
    shift(&jittered, p.shift_x, p.shift_y)
}

/// Flip, color jitter, then shift.
pub fn augment<R: Rng>(img: &ImageU8, rng: &mut R, config: &AugmentConfig) -> ImageU8 {
    let p = sample_params(rng, config, img.width(), img.height());
    apply_params(img, &p)
}

/// Augments sample `index` of `epoch` using its own stream under `seed`.
pub fn augment_sample(
    img: &ImageU8,
    config: &AugmentConfig,
    seed: u64,
    epoch: usize,
    index: usize,
) -> ImageU8 {
    let mut rng = seed::stream(seed, &[STREAM_AUGMENT, epoch as u64, index as u64]);
    augment(img, &mut rng, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(w: usize, h: usize) -> ImageU8 {
        ImageU8::from_fn(w, h, ColorSpace::Rgb, |x, y| {
            [(x * 30) as u8, (y * 20) as u8, 90]
        })
        .unwrap()
    }

    #[test]
    fn flip_is_an_involution() {
        let img = ramp(5, 4);
        for (h, v) in [(true, false), (false, true), (true, true)] {
            assert_eq!(flip(&flip(&img, h, v), h, v), img);
        }
        assert_ne!(flip(&img, true, false), img);
    }

    #[test]
    fn brightness_on_mid_gray() {
        let img = ImageU8::filled(2, 2, ColorSpace::Rgb, &[128, 128, 128]).unwrap();
        let out = apply_jitter(&img, 0.1, 1.0, 1.0, 0.0);
        assert!(out.data().iter().all(|&v| v == 154));
    }

    #[test]
    fn identity_jitter_and_contrast_one() {
        let img = ramp(6, 6);
        assert_eq!(apply_jitter(&img, 0.0, 1.0, 1.0, 0.0), img);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(augment(&img, &mut rng, &AugmentConfig::identity()), img);
    }

    #[test]
    fn shift_right_by_three() {
        let img = ImageU8::from_fn(8, 8, ColorSpace::Gray, |x, _| [(x + 1) as u8]).unwrap();
        let out = shift(&img, 3, 0);
        for y in 0..8 {
            for x in 0..8 {
                let want = if x < 3 { 0 } else { (x - 2) as u8 };
                assert_eq!(out.pixel(x, y)[0], want);
            }
        }
        assert_eq!(shift(&img, 0, 0), img);
    }

    #[test]
    fn sampled_parameters_stay_in_range() {
        let cfg = AugmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut h, mut v) = (0usize, 0usize);
        let n = 10_000;
        for _ in 0..n {
            let p = sample_params(&mut rng, &cfg, 256, 200);
            h += p.hflip as usize;
            v += p.vflip as usize;
            assert!(p.brightness.abs() <= 0.1);
            assert!((0.8..=1.2).contains(&p.contrast) && (0.8..=1.2).contains(&p.saturation));
            assert!(p.hue.abs() <= 0.05);
            assert!(p.shift_x.abs() <= 25 && p.shift_y.abs() <= 20);
        }
        for count in [h, v] {
            assert!((count as f64 / n as f64 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn per_sample_streams_are_reproducible() {
        let img = ramp(8, 8);
        let cfg = AugmentConfig::default();
        assert_eq!(
            augment_sample(&img, &cfg, 5, 2, 7),
            augment_sample(&img, &cfg, 5, 2, 7)
        );
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let cfg = AugmentConfig {
            p_hflip: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = AugmentConfig {
            contrast_range: [1.2, 0.8],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(AugmentConfig::default().validate().is_ok());
    }
}
