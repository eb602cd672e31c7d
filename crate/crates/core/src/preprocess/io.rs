use std::path::Path;

use super::image::{ColorSpace, ImageU8};
use crate::error::{Error, Result};

/// Decodes a PNG or JPEG file to RGB.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<ImageU8> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageU8::new(w as usize, h as usize, ColorSpace::Rgb, rgb.into_raw())
}

/// Writes a GRAY or RGB image as PNG.
pub fn save_png(img: &ImageU8, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.space() {
        ColorSpace::Gray => image::ExtendedColorType::L8,
        ColorSpace::Rgb => image::ExtendedColorType::Rgb8,
        other => {
            return Err(Error::Validation(format!(
                "only GRAY and RGB images can be written, got {other}"
            )))
        }
    };
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}
