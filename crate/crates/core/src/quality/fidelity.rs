//! Full-reference fidelity metrics between two images of equal shape.

use crate::error::{Error, Result};
use crate::preprocess::{ColorSpace, ImageU8};

const PEAK: f64 = 255.0;
const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

fn same_shape(a: &ImageU8, b: &ImageU8) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Validation(format!(
            "image shapes differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Mean squared difference over all pixels and channels.
pub fn mse(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    same_shape(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// PSNR in dB for an 8-bit peak; `+inf` when `mse` is zero.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

pub fn psnr(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

pub fn format_psnr(db: f64) -> String {
    if db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{db:.2}")
    }
}

fn gaussian_window() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut w = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, slot) in w.iter_mut().enumerate() {
        let d = i as f64 - SSIM_RADIUS as f64;
        *slot = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

/// Separable Gaussian filter evaluated only where the window fits.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (vw, vh) = (w - n + 1, h - n + 1);
    let mut rows = vec![0.0; h * vw];
    for y in 0..h {
        for x in 0..vw {
            rows[y * vw + x] = (0..n).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; vh * vw];
    for y in 0..vh {
        for x in 0..vw {
            out[y * vw + x] = (0..n).map(|i| k[i] * rows[(y + i) * vw + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all 11x11 Gaussian windows (sigma 1.5) fully inside the
/// image.
pub fn ssim(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    a.require(ColorSpace::Gray, "ssim")?;
    same_shape(a, b)?;
    let (w, h) = (a.width(), a.height());
    let n = 2 * SSIM_RADIUS + 1;
    if w < n || h < n {
        return Err(Error::Precondition(format!(
            "ssim needs images of at least {n}x{n}, got {w}x{h}"
        )));
    }
    let k = gaussian_window();
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(s, t)| s * t).collect::<Vec<_>>();
    let mx = filter_valid(&x, w, h, &k);
    let my = filter_valid(&y, w, h, &k);
    let mxx = filter_valid(&prod(&x, &x), w, h, &k);
    let myy = filter_valid(&prod(&y, &y), w, h, &k);
    let mxy = filter_valid(&prod(&x, &y), w, h, &k);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cxy = mxy[i] - ux * uy;
        total += ((2.0 * ux * uy + SSIM_C1) * (2.0 * cxy + SSIM_C2))
            / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2));
    }
    Ok(total / mx.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityScores {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

pub fn fidelity(reference: &ImageU8, test: &ImageU8) -> Result<FidelityScores> {
    let m = mse(reference, test)?;
    Ok(FidelityScores {
        mse: m,
        psnr: psnr_from_mse(m),
        ssim: ssim(reference, test)?,
    })
}

pub const FIDELITY_CSV_HEADER: [&str; 4] = ["filename", "mse", "psnr", "ssim"];

pub fn fidelity_csv_row(filename: &str, s: &FidelityScores) -> [String; 4] {
    [
        filename.to_string(),
        format!("{:.2}", s.mse),
        format_psnr(s.psnr),
        format!("{:.4}", s.ssim),
    ]
}
