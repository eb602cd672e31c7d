use std::fmt::Write as _;

use super::image::{ColorSpace, ImageU8};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    pub bins: [u64; 256],
    pub total: u64,
}

impl Histogram256 {
    pub fn normalized(&self) -> [f64; 256] {
        let total = self.total.max(1) as f64;
        self.bins.map(|b| b as f64 / total)
    }

    /// `bin,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,count\n");
        for (bin, count) in self.bins.iter().enumerate() {
            let _ = writeln!(out, "{bin},{count}");
        }
        out
    }
}

pub fn histogram(img: &ImageU8) -> Result<Histogram256> {
    img.require(ColorSpace::Gray, "histogram")?;
    let mut bins = [0u64; 256];
    for &v in img.data() {
        bins[v as usize] += 1;
    }
    Ok(Histogram256 {
        bins,
        total: img.data().len() as u64,
    })
}

/// L1 distance between normalized histograms, in `[0, 2]`.
pub fn histogram_distance(a: &Histogram256, b: &Histogram256) -> f64 {
    a.normalized()
        .iter()
        .zip(b.normalized())
        .map(|(x, y)| (x - y).abs())
        .sum()
}
