use std::fmt;

use serde::{Deserialize, Serialize};

use super::contour::extract_contours;
use crate::error::{Error, Result};
use crate::preprocess::{luminance, ColorSpace, ImageU8};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityThresholds {
    pub min_luminance: f64,
    pub max_luminance: f64,
    pub min_contrast: f64,
    pub min_sharpness: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            min_luminance: 20.0,
            max_luminance: 235.0,
            min_contrast: 15.0,
            min_sharpness: 20.0,
        }
    }
}

impl QualityThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.min_luminance,
            self.max_luminance,
            self.min_contrast,
            self.min_sharpness,
        ];
        if all.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Config(format!(
                "quality thresholds must be non-negative: {self:?}"
            )));
        }
        if self.min_luminance > self.max_luminance {
            return Err(Error::Config(format!(
                "quality.min_luminance {} exceeds max_luminance {}",
                self.min_luminance, self.max_luminance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    IlluminationLow,
    IlluminationHigh,
    Contrast,
    Sharpness,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::IlluminationLow => "illumination-low",
            RejectReason::IlluminationHigh => "illumination-high",
            RejectReason::Contrast => "contrast",
            RejectReason::Sharpness => "sharpness",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub sharpness: f64,
    pub illumination: f64,
    pub contrast: f64,
    pub contour_count: usize,
    /// Empty when the image is accepted; otherwise in check order.
    pub reasons: Vec<RejectReason>,
}

impl QualityReport {
    pub fn accepted(&self) -> bool {
        self.reasons.is_empty()
    }

    pub fn decision(&self) -> &'static str {
        if self.accepted() {
            "accept"
        } else {
            "reject"
        }
    }

    pub fn reason_codes(&self) -> String {
        self.reasons
            .iter()
            .map(|r| r.code())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Scores an RGB (or already gray) image and applies `thresholds`.
pub fn assess_quality(img: &ImageU8, thresholds: &QualityThresholds) -> QualityReport {
    let luma = match img.space() {
        ColorSpace::Rgb => luminance(img).expect("tag checked"),
        _ => crate::preprocess::channel_extract(img, 0).expect("at least one channel"),
    };
    let n = luma.data().len() as f64;
    let illumination = luma.mean();
    let variance = luma
        .data()
        .iter()
        .map(|&v| (v as f64 - illumination).powi(2))
        .sum::<f64>()
        / n;
    let contrast = variance.sqrt();
    let (sharpness, contour_count) = match extract_contours(&luma) {
        Ok(set) => (set.sharpness, set.contours.len()),
        Err(_) => (0.0, 0),
    };
    let mut reasons = Vec::new();
    if illumination < thresholds.min_luminance {
        reasons.push(RejectReason::IlluminationLow);
    }
    if illumination > thresholds.max_luminance {
        reasons.push(RejectReason::IlluminationHigh);
    }
    if contrast < thresholds.min_contrast {
        reasons.push(RejectReason::Contrast);
    }
    if sharpness < thresholds.min_sharpness {
        reasons.push(RejectReason::Sharpness);
    }
    QualityReport {
        sharpness,
        illumination,
        contrast,
        contour_count,
        reasons,
    }
}

pub const QUALITY_CSV_HEADER: [&str; 6] = [
    "filename",
    "sharpness",
    "illumination",
    "contrast",
    "decision",
    "reason",
];

pub fn quality_csv_row(filename: &str, report: &QualityReport) -> [String; 6] {
    [
        filename.to_string(),
        format!("{:.4}", report.sharpness),
        format!("{:.4}", report.illumination),
        format!("{:.4}", report.contrast),
        report.decision().to_string(),
        report.reason_codes(),
    ]
}
