//! Contrast-limited adaptive histogram equalization on 8-bit gray images.

use serde::{Deserialize, Serialize};

use super::image::{ColorSpace, ImageU8};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClaheParams {
    /// Clip ceiling as a multiple of the mean bin height; `inf` disables clipping.
    pub clip_limit: f64,
    /// Tile grid as `[columns, rows]`.
    pub grid: [usize; 2],
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            grid: [8, 8],
        }
    }
}

impl ClaheParams {
    pub fn unclipped(grid: [usize; 2]) -> Self {
        Self {
            clip_limit: f64::INFINITY,
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid[0] == 0 || self.grid[1] == 0 {
            return Err(Error::Config(format!(
                "clahe grid must be at least 1x1, got {:?}",
                self.grid
            )));
        }
        if self.clip_limit.is_nan() || self.clip_limit <= 0.0 {
            return Err(Error::Config(format!(
                "clahe clip_limit must be positive, got {}",
                self.clip_limit
            )));
        }
        Ok(())
    }
}

/// Per-tile lookup tables, row-major over the grid.
#[derive(Debug, Clone)]
pub struct TileMappings {
    pub grid: [usize; 2],
    pub tile_size: [usize; 2],
    pub luts: Vec<[u8; 256]>,
}

impl TileMappings {
    pub fn lut(&self, col: usize, row: usize) -> &[u8; 256] {
        &self.luts[row * self.grid[0] + col]
    }
}

/// Equalizing map for one histogram: `round(255 * cdf(v) / total)`.
pub fn equalization_lut(hist: &[u64; 256], total: u64) -> [u8; 256] {
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    for (v, &count) in hist.iter().enumerate() {
        cdf += count;
        // integer round-half-up of 255 * cdf / total
        lut[v] = ((2 * 255 * cdf + total) / (2 * total)) as u8;
    }
    lut
}

fn clip_histogram(hist: &mut [u64; 256], ceiling: u64) {
    let mut excess = 0u64;
    for bin in hist.iter_mut() {
        if *bin > ceiling {
            excess += *bin - ceiling;
            *bin = ceiling;
        }
    }
    let share = excess / 256;
    let remainder = (excess % 256) as usize;
    for (i, bin) in hist.iter_mut().enumerate() {
        *bin += share + u64::from(i < remainder);
    }
}

pub fn tile_mappings(img: &ImageU8, params: &ClaheParams) -> Result<TileMappings> {
    img.require(ColorSpace::Gray, "clahe")?;
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let [gx, gy] = params.grid;
    let tw = w.div_ceil(gx);
    let th = h.div_ceil(gy);
    let tile_pixels = (tw * th) as u64;
    let ceiling = if params.clip_limit.is_finite() {
        Some(((params.clip_limit * tile_pixels as f64 / 256.0).floor() as u64).max(1))
    } else {
        None
    };
    let data = img.data();
    let mut luts = Vec::with_capacity(gx * gy);
    for ty in 0..gy {
        for tx in 0..gx {
            let mut hist = [0u64; 256];
            for y in ty * th..(ty + 1) * th {
                // edge replication for tiles that overhang the image
                let row = &data[y.min(h - 1) * w..][..w];
                for x in tx * tw..(tx + 1) * tw {
                    hist[row[x.min(w - 1)] as usize] += 1;
                }
            }
            if let Some(c) = ceiling {
                clip_histogram(&mut hist, c);
            }
            luts.push(equalization_lut(&hist, tile_pixels));
        }
    }
    Ok(TileMappings {
        grid: params.grid,
        tile_size: [tw, th],
        luts,
    })
}

/// Neighbouring tile indices and the weight of the second one for a pixel
/// coordinate; tiles beyond the grid edge are clamped.
fn neighbours(pos: usize, tile: usize, tiles: usize) -> (usize, usize, f64) {
    let t = (pos as f64 + 0.5) / tile as f64 - 0.5;
    if t <= 0.0 {
        return (0, 0, 0.0);
    }
    let lo = t.floor() as usize;
    if lo + 1 >= tiles {
        return (tiles - 1, tiles - 1, 0.0);
    }
    (lo, lo + 1, t - lo as f64)
}

pub fn clahe(img: &ImageU8, params: &ClaheParams) -> Result<ImageU8> {
    let maps = tile_mappings(img, params)?;
    let (w, h) = (img.width(), img.height());
    let [tw, th] = maps.tile_size;
    let [gx, gy] = maps.grid;
    let cols: Vec<_> = (0..w).map(|x| neighbours(x, tw, gx)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (r0, r1, wy) = neighbours(y, th, gy);
        for (x, &(c0, c1, wx)) in cols.iter().enumerate() {
            let v = img.data()[y * w + x] as usize;
            let top = (1.0 - wx) * maps.lut(c0, r0)[v] as f64 + wx * maps.lut(c1, r0)[v] as f64;
            let bottom = (1.0 - wx) * maps.lut(c0, r1)[v] as f64 + wx * maps.lut(c1, r1)[v] as f64;
            let blended = (1.0 - wy) * top + wy * bottom;
            out.push(blended.round().clamp(0.0, 255.0) as u8);
        }
    }
    ImageU8::new(w, h, ColorSpace::Gray, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> ImageU8 {
        ImageU8::from_fn(w, h, ColorSpace::Gray, |x, y| [f(x, y)]).unwrap()
    }

    #[test]
    fn constant_image_stays_constant() {
        for params in [ClaheParams::default(), ClaheParams::unclipped([3, 2])] {
            let out = clahe(&gray(37, 29, |_, _| 90), &params).unwrap();
            assert!(out.data().iter().all(|&v| v == out.data()[0]));
        }
    }

    #[test]
    fn clipping_redistributes_excess_from_bin_zero() {
        let mut hist = [0u64; 256];
        hist[10] = 1000;
        clip_histogram(&mut hist, 4);
        assert_eq!(hist.iter().sum::<u64>(), 1000);
        // excess 996 = 3 * 256 + 228
        assert_eq!(hist[0], 4);
        assert_eq!(hist[227], 4);
        assert_eq!(hist[228], 3);
        assert_eq!(hist[10], 8);
    }

    #[test]
    fn luts_are_monotone() {
        let img = gray(64, 48, |x, y| ((x * 7 + y * 13) % 251) as u8);
        let maps = tile_mappings(&img, &ClaheParams::default()).unwrap();
        for lut in &maps.luts {
            assert!(lut.windows(2).all(|p| p[0] <= p[1]));
        }
    }

    #[test]
    fn rejects_color_and_bad_grid() {
        let rgb = ImageU8::filled(8, 8, ColorSpace::Rgb, &[1, 2, 3]).unwrap();
        assert!(matches!(
            clahe(&rgb, &ClaheParams::default()),
            Err(Error::Validation(_))
        ));
        let g = gray(8, 8, |_, _| 0);
        let bad = ClaheParams {
            clip_limit: 2.0,
            grid: [0, 8],
        };
        assert!(matches!(clahe(&g, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn non_dividing_grid_keeps_dims() {
        let img = gray(50, 33, |x, y| (x * 5 + y) as u8);
        let out = clahe(&img, &ClaheParams::default()).unwrap();
        assert_eq!((out.width(), out.height()), (50, 33));
    }
}
