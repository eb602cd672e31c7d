use super::image::ImageU8;
use crate::error::{Error, Result};

fn taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
        .clamp(0.0, (src_len - 1) as f64);
    let lo = s.floor() as usize;
    (lo, (lo + 1).min(src_len - 1), s - lo as f64)
}

/// Bilinear resampling with half-pixel centres and clamped borders.
pub fn resize(img: &ImageU8, width: usize, height: usize) -> Result<ImageU8> {
    if width == 0 || height == 0 {
        return Err(Error::Config(format!(
            "resize target {width}x{height} is empty"
        )));
    }
    if (width, height) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    let c = img.channels();
    let sw = img.width();
    let src = img.data();
    let xs: Vec<_> = (0..width).map(|x| taps(x, sw, width)).collect();
    let mut out = Vec::with_capacity(width * height * c);
    for y in 0..height {
        let (y0, y1, fy) = taps(y, img.height(), height);
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let at = |x: usize, y: usize| src[(y * sw + x) * c + ch] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                out.push((top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageU8::new(width, height, img.space(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::ColorSpace;

    #[test]
    fn checkerboard_upsample() {
        let img = ImageU8::new(2, 2, ColorSpace::Gray, vec![0, 255, 255, 0]).unwrap();
        let out = resize(&img, 4, 4).unwrap();
        // source coords per output index: 0, 0.25, 0.75, 1 (clamped)
        #[rustfmt::skip]
        let expected = [
            0, 64, 191, 255,
            64, 96, 159, 191,
            191, 159, 96, 64,
            255, 191, 64, 0,
        ];
        assert_eq!(out.data(), expected);
    }

    #[test]
    fn identity_and_shape() {
        let img = ImageU8::from_fn(5, 3, ColorSpace::Rgb, |x, y| [x as u8, y as u8, 9]).unwrap();
        assert_eq!(resize(&img, 5, 3).unwrap(), img);
        let big = ImageU8::filled(512, 512, ColorSpace::Gray, &[3]).unwrap();
        let small = resize(&big, 256, 256).unwrap();
        assert_eq!(small.dims(), (256, 256, 1));
        assert!(small.data().iter().all(|&v| v == 3));
        assert!(matches!(resize(&img, 0, 4), Err(Error::Config(_))));
    }
}
