use super::image::{ColorSpace, ImageU8};
use crate::error::{Error, Result};

/// `out = round(255 * (in / 255)^(1 / gamma))`, so gamma below 1 darkens.
pub fn gamma_lut(gamma: f64) -> Result<[u8; 256]> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Config(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = (255.0 * (v as f64 / 255.0).powf(1.0 / gamma)).round() as u8;
    }
    Ok(lut)
}

pub fn gamma_correct(img: &ImageU8, gamma: f64) -> Result<ImageU8> {
    if !matches!(img.space(), ColorSpace::Gray | ColorSpace::Rgb) {
        return Err(Error::Validation(format!(
            "gamma correction expects a GRAY or RGB image, got {}",
            img.space()
        )));
    }
    let lut = gamma_lut(gamma)?;
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = lut[*v as usize];
    }
    Ok(out)
}
