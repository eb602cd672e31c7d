//! sRGB to CIELAB (D65) and hexcone HSV conversions.

use super::image::{ColorSpace, ImageU8};
use crate::error::{Error, Result};

const WHITE_D65: [f64; 3] = [0.95047, 1.0, 1.08883];
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.240_454_2, -1.537_138_5, -0.498_531_4],
    [-0.969_266_0, 1.876_010_8, 0.041_556_0],
    [0.055_643_4, -0.204_025_9, 1.057_225_2],
];
const DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

/// Unquantized CIELAB of an 8-bit sRGB triple: `L` in 0..=100.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| srgb_to_linear(c as f64 / 255.0));
    let xyz = mat_mul(&RGB_TO_XYZ, lin);
    let [fx, fy, fz] = [0, 1, 2].map(|i| lab_f(xyz[i] / WHITE_D65[i]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse of [`srgb_to_lab`], rounded and clamped to 8 bits.
pub fn lab_to_srgb(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [fx, fy, fz]
        .iter()
        .zip(WHITE_D65)
        .map(|(&f, w)| lab_f_inv(f) * w)
        .collect::<Vec<_>>();
    let lin = mat_mul(&XYZ_TO_RGB, [xyz[0], xyz[1], xyz[2]]);
    lin.map(|c| {
        (linear_to_srgb(c.clamp(0.0, 1.0)) * 255.0)
            .round()
            .clamp(0.0, 255.0) as u8
    })
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn quantize_lab(lab: [f64; 3]) -> [u8; 3] {
    [
        to_u8(lab[0] * 255.0 / 100.0),
        to_u8(lab[1] + 128.0),
        to_u8(lab[2] + 128.0),
    ]
}

pub fn dequantize_lab(stored: [u8; 3]) -> [f64; 3] {
    [
        stored[0] as f64 * 100.0 / 255.0,
        stored[1] as f64 - 128.0,
        stored[2] as f64 - 128.0,
    ]
}

fn map_pixels(img: &ImageU8, space: ColorSpace, f: impl Fn([u8; 3]) -> [u8; 3]) -> Result<ImageU8> {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|p| f([p[0], p[1], p[2]]))
        .collect();
    ImageU8::new(img.width(), img.height(), space, data)
}

pub fn rgb_to_lab(img: &ImageU8) -> Result<ImageU8> {
    img.require(ColorSpace::Rgb, "rgb_to_lab")?;
    // 2^24 inputs but typically far fewer distinct colors; a cache of the
    // full cube would cost 48 MiB, so convert directly.
    map_pixels(img, ColorSpace::Lab, |p| quantize_lab(srgb_to_lab(p)))
}

pub fn lab_to_rgb(img: &ImageU8) -> Result<ImageU8> {
    img.require(ColorSpace::Lab, "lab_to_rgb")?;
    map_pixels(img, ColorSpace::Rgb, |p| lab_to_srgb(dequantize_lab(p)))
}

/// Hexcone HSV with all components in `[0, 1]` (hue as a fraction of a turn).
pub fn rgb_to_hsv_unit(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    [h, s, max]
}

pub fn hsv_unit_to_rgb(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let frac = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * frac);
    let t = v * (1.0 - s * (1.0 - frac));
    match sector as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

pub fn rgb_to_hsv(img: &ImageU8) -> Result<ImageU8> {
    img.require(ColorSpace::Rgb, "rgb_to_hsv")?;
    map_pixels(img, ColorSpace::Hsv, |p| {
        let [h, s, _] = rgb_to_hsv_unit(p.map(|c| c as f64 / 255.0));
        [to_u8(h * 255.0), to_u8(s * 255.0), p[0].max(p[1]).max(p[2])]
    })
}

/// Single channel of a multi-channel image as a gray image.
pub fn channel_extract(img: &ImageU8, index: usize) -> Result<ImageU8> {
    if index >= img.channels() {
        return Err(Error::Validation(format!(
            "channel {index} out of range for {} image",
            img.space()
        )));
    }
    let c = img.channels();
    let data = img.data().iter().skip(index).step_by(c).copied().collect();
    ImageU8::new(img.width(), img.height(), ColorSpace::Gray, data)
}

/// Rec. 601 luma of an RGB image.
pub fn luminance(img: &ImageU8) -> Result<ImageU8> {
    img.require(ColorSpace::Rgb, "luminance")?;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| to_u8(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
        .collect();
    ImageU8::new(img.width(), img.height(), ColorSpace::Gray, data)
}

/// Gray image replicated into three RGB channels.
pub fn gray_to_rgb(img: &ImageU8) -> Result<ImageU8> {
    img.require(ColorSpace::Gray, "gray_to_rgb")?;
    let data = img.data().iter().flat_map(|&v| [v, v, v]).collect();
    ImageU8::new(img.width(), img.height(), ColorSpace::Rgb, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(rgb: [u8; 3]) -> ImageU8 {
        ImageU8::new(1, 1, ColorSpace::Rgb, rgb.to_vec()).unwrap()
    }

    #[test]
    fn lab_white_and_black() {
        assert_eq!(
            rgb_to_lab(&px([255, 255, 255])).unwrap().data(),
            [255, 128, 128]
        );
        assert_eq!(rgb_to_lab(&px([0, 0, 0])).unwrap().data(), [0, 128, 128]);
    }

    #[test]
    fn lab_matches_reference_values() {
        // reference: scikit-image rgb2lab
        let gray = srgb_to_lab([119, 119, 119]);
        assert!((gray[0] - 50.034_438_8).abs() < 1e-3, "{gray:?}");
        assert!(gray[1].abs() < 1e-2 && gray[2].abs() < 1e-2);
        assert_eq!(
            rgb_to_lab(&px([119, 119, 119])).unwrap().data(),
            [128, 128, 128]
        );
        let red = srgb_to_lab([200, 30, 60]);
        for (got, want) in red.iter().zip([43.563_032_3, 64.057_043_4, 28.472_345_7]) {
            assert!((got - want).abs() < 1e-2, "{red:?}");
        }
    }

    #[test]
    fn hsv_values() {
        assert_eq!(rgb_to_hsv(&px([255, 0, 0])).unwrap().data(), [0, 255, 255]);
        assert_eq!(rgb_to_hsv(&px([90, 90, 90])).unwrap().data()[1], 0);
        // reference: Python colorsys.rgb_to_hsv
        assert_eq!(
            rgb_to_hsv(&px([128, 64, 0])).unwrap().data(),
            [21, 255, 128]
        );
    }

    #[test]
    fn hsv_unit_roundtrip() {
        for rgb in [
            [0.2, 0.7, 0.1],
            [0.9, 0.9, 0.1],
            [0.3, 0.1, 0.8],
            [0.5, 0.5, 0.5],
        ] {
            let back = hsv_unit_to_rgb(rgb_to_hsv_unit(rgb));
            for (a, b) in back.iter().zip(rgb) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wrong_space_rejected() {
        let gray = ImageU8::filled(2, 2, ColorSpace::Gray, &[4]).unwrap();
        assert!(matches!(rgb_to_lab(&gray), Err(Error::Validation(_))));
        assert!(rgb_to_hsv(&gray).is_err());
        assert!(channel_extract(&gray, 1).is_err());
    }
}
