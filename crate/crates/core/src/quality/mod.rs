//! Contour-based quality gating and full-reference fidelity metrics.

mod contour;
mod fidelity;
mod gate;

pub use contour::{
    extract_contours, otsu_threshold, outer_borders, sobel_magnitude, Contour, ContourSet,
    MIN_CONTOUR_POINTS,
};
pub use fidelity::{
    fidelity, fidelity_csv_row, format_psnr, mse, psnr, psnr_from_mse, ssim, FidelityScores,
    FIDELITY_CSV_HEADER,
};
pub use gate::{
    assess_quality, quality_csv_row, QualityReport, QualityThresholds, RejectReason,
    QUALITY_CSV_HEADER,
};
