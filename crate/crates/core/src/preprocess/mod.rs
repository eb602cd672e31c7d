//! Color conversion, contrast enhancement and resampling of fundus images.

mod clahe;
mod color;
mod gamma;
mod histogram;
mod image;
mod io;
mod pipeline;
mod resize;

pub use self::image::{ColorSpace, ImageU8};
pub use clahe::{clahe, equalization_lut, tile_mappings, ClaheParams, TileMappings};
pub use color::{
    channel_extract, dequantize_lab, gray_to_rgb, hsv_unit_to_rgb, lab_to_rgb, lab_to_srgb,
    luminance, quantize_lab, rgb_to_hsv, rgb_to_hsv_unit, rgb_to_lab, srgb_to_lab,
};
pub use gamma::{gamma_correct, gamma_lut};
pub use histogram::{histogram, histogram_distance, Histogram256};
pub use io::{is_image_path, load_rgb, save_png};
pub use pipeline::{enhance_pipeline, to_network_input, EnhanceConfig, Enhanced};
pub use resize::resize;
