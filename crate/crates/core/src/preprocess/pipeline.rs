//! The fixed enhancement chain: LAB lightness, CLAHE, optional gamma, resize.

use serde::{Deserialize, Serialize};

use super::clahe::{clahe, ClaheParams};
use super::color::{channel_extract, gray_to_rgb, rgb_to_lab};
use super::gamma::gamma_correct;
use super::image::{ColorSpace, ImageU8};
use super::resize::resize;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhanceConfig {
    pub clahe: ClaheParams,
    pub gamma_enabled: bool,
    pub gamma: f64,
    pub output_size: usize,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            clahe: ClaheParams::default(),
            gamma_enabled: false,
            gamma: 1.0,
            output_size: 256,
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        self.clahe.validate()?;
        if self.gamma_enabled && !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.output_size == 0 {
            return Err(Error::Config("enhance output_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Enhanced {
    pub image: ImageU8,
    /// One line per stage actually applied, in order.
    pub stages: Vec<String>,
}

pub fn enhance_pipeline(img: &ImageU8, config: &EnhanceConfig) -> Result<Enhanced> {
    img.require(ColorSpace::Rgb, "enhance_pipeline")?;
    config.validate()?;
    let mut stages = Vec::new();
    let lab = rgb_to_lab(img)?;
    stages.push("rgb_to_lab".to_string());
    let mut current = channel_extract(&lab, 0)?;
    stages.push("channel_extract L".to_string());
    current = clahe(&current, &config.clahe)?;
    stages.push(format!(
        "clahe clip={} grid={}x{}",
        config.clahe.clip_limit, config.clahe.grid[0], config.clahe.grid[1]
    ));
    if config.gamma_enabled {
        current = gamma_correct(&current, config.gamma)?;
        stages.push(format!("gamma {}", config.gamma));
    }
    let n = config.output_size;
    current = resize(&current, n, n)?;
    stages.push(format!("resize {n}x{n}"));
    for stage in &stages {
        log::debug!("enhance stage: {stage}");
    }
    Ok(Enhanced {
        image: current,
        stages,
    })
}

/// Stacks enhanced gray images into an `N x H x W x 3` tensor in `[0, 1]`,
/// replicating the single channel.
pub fn to_network_input(images: &[ImageU8]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::Precondition("no images to stack".into()))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(images.len() * w * h * 3);
    for img in images {
        if (img.width(), img.height()) != (w, h) {
            return Err(Error::Validation(format!(
                "mixed image sizes in batch: {:?} vs {:?}",
                img.dims(),
                first.dims()
            )));
        }
        let rgb = match img.space() {
            ColorSpace::Gray => gray_to_rgb(img)?,
            ColorSpace::Rgb => img.clone(),
            other => {
                return Err(Error::Validation(format!(
                    "network input must be GRAY or RGB, got {other}"
                )))
            }
        };
        data.extend(rgb.data().iter().map(|&v| v as f64 / 255.0));
    }
    Tensor::new(&[images.len(), h, w, 3], data)
}
