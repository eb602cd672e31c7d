//! Edge contours: Sobel magnitude, Otsu binarization and outer-border tracing.

use crate::error::{Error, Result};
use crate::preprocess::{ColorSpace, ImageU8};

/// Contours shorter than this many boundary points are discarded.
pub const MIN_CONTOUR_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    /// Boundary pixels in tracing order.
    pub points: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct ContourSet {
    pub contours: Vec<Contour>,
    /// Mean gradient magnitude over the distinct pixels of retained contours.
    pub sharpness: f64,
    pub threshold: f64,
}

/// Sobel gradient magnitude scaled by 1/8, with replicated borders.
pub fn sobel_magnitude(img: &ImageU8) -> Result<Vec<f64>> {
    img.require(ColorSpace::Gray, "sobel_magnitude")?;
    let (w, h) = (img.width(), img.height());
    let d = img.data();
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        d[y * w + x] as f64
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push((gx * gx + gy * gy).sqrt() / 8.0);
        }
    }
    Ok(out)
}

/// Otsu threshold over a 256-bin histogram spanning `[0, max]`; pixels
/// strictly above the returned value are foreground. `None` when all values
/// are equal.
pub fn otsu_threshold(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max <= min {
        return None;
    }
    let scale = 255.0 / max;
    let mut hist = [0u64; 256];
    for &v in values {
        hist[((v * scale) as usize).min(255)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_bin) = (-1.0, 0usize);
    for (i, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += i as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_bin = i;
        }
    }
    Some((best_bin + 1) as f64 / scale)
}

// Clockwise starting west, in image coordinates (y grows downward).
const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn direction_of(from: (usize, usize), to: (isize, isize)) -> usize {
    let d = (to.0 - from.0 as isize, to.1 - from.1 as isize);
    NEIGHBOURS
        .iter()
        .position(|&n| n == d)
        .expect("backtrack is a neighbour")
}

/// Moore-neighbour tracing of the outer border of the component containing
/// `start`, which must be its first pixel in raster order. Tracing stops when
/// the walk would leave `start` towards the same neighbour a second time.
fn trace_outer(mask: &[bool], w: usize, h: usize, start: (usize, usize)) -> Vec<(usize, usize)> {
    let fg = |x: isize, y: isize| {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && mask[y as usize * w + x as usize]
    };
    let mut points = vec![start];
    let mut current = start;
    // The west neighbour of a raster-first pixel is background.
    let mut backtrack = (start.0 as isize - 1, start.1 as isize);
    let mut first_step = None;
    for _ in 0..4 * mask.len() + 8 {
        let k = direction_of(current, backtrack);
        let found = (1..=8).map(|s| (k + s) % 8).find(|&dir| {
            let (dx, dy) = NEIGHBOURS[dir];
            fg(current.0 as isize + dx, current.1 as isize + dy)
        });
        let Some(dir) = found else { break };
        let (dx, dy) = NEIGHBOURS[dir];
        let next = (
            (current.0 as isize + dx) as usize,
            (current.1 as isize + dy) as usize,
        );
        if current == start {
            match first_step {
                Some(s) if s == next => break,
                Some(_) => {}
                None => first_step = Some(next),
            }
        }
        let (bx, by) = NEIGHBOURS[(dir + 7) % 8];
        backtrack = (current.0 as isize + bx, current.1 as isize + by);
        current = next;
        if current != start {
            points.push(current);
        }
    }
    points
}

/// Outer borders of all 8-connected components of `mask`, in raster order
/// of their first pixel.
pub fn outer_borders(mask: &[bool], w: usize, h: usize) -> Vec<Contour> {
    let mut seen = vec![false; mask.len()];
    let mut contours = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for (dx, dy) in NEIGHBOURS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if mask[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        contours.push(Contour {
            points: trace_outer(mask, w, h, (start % w, start / w)),
        });
    }
    contours
}

pub fn extract_contours(img: &ImageU8) -> Result<ContourSet> {
    img.require(ColorSpace::Gray, "extract_contours")?;
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::Precondition(format!(
            "contour extraction needs at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let magnitude = sobel_magnitude(img)?;
    let Some(threshold) = otsu_threshold(&magnitude) else {
        return Ok(ContourSet {
            contours: Vec::new(),
            sharpness: 0.0,
            threshold: 0.0,
        });
    };
    let mask: Vec<bool> = magnitude.iter().map(|&m| m > threshold).collect();
    let contours: Vec<Contour> = outer_borders(&mask, w, h)
        .into_iter()
        .filter(|c| c.points.len() >= MIN_CONTOUR_POINTS)
        .collect();
    let mut on_contour = vec![false; w * h];
    for c in &contours {
        for &(x, y) in &c.points {
            on_contour[y * w + x] = true;
        }
    }
    let (sum, count) = on_contour
        .iter()
        .zip(&magnitude)
        .filter(|(on, _)| **on)
        .fold((0.0, 0usize), |(s, n), (_, m)| (s + m, n + 1));
    Ok(ContourSet {
        contours,
        sharpness: if count == 0 { 0.0 } else { sum / count as f64 },
        threshold,
    })
}
