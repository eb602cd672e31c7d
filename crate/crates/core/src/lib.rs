//! Fundus photograph screening: contour-based quality gating, CLAHE
//! enhancement, seeded augmentation and a CNN-LSTM classifier with
//! hand-written backpropagation.

pub mod augment;
pub mod cli;
pub mod config;
pub mod data;
mod error;
pub mod kernels;
pub mod lstm;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod quality;
pub mod seed;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
