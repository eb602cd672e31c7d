//! Epoch batching over in-memory tensors or image files.

use std::path::PathBuf;

use rand::seq::SliceRandom;

use super::manifest::Manifest;
use crate::augment::{augment_sample, AugmentConfig};
use crate::error::{Error, Result};
use crate::preprocess::{enhance_pipeline, load_rgb, to_network_input, EnhanceConfig, ImageU8};
use crate::seed::{self, STREAM_SHUFFLE};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Batch {
    /// `N x H x W x 3`, values in `[0, 1]`.
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn one_hot(&self, classes: usize) -> Result<Tensor> {
        one_hot(&self.labels, classes)
    }
}

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; labels.len() * classes];
    for (row, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Validation(format!(
                "label {l} outside {classes} classes"
            )));
        }
        data[row * classes + l] = 1.0;
    }
    Tensor::new(&[labels.len(), classes], data)
}

/// What a source needs to know to materialize a batch.
#[derive(Debug, Clone, Copy)]
pub struct LoadContext {
    pub train: bool,
    pub augment: bool,
    pub seed: u64,
    pub epoch: usize,
}

impl LoadContext {
    pub fn inference() -> Self {
        Self {
            train: false,
            augment: false,
            seed: 0,
            epoch: 0,
        }
    }
}

pub trait BatchSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Class index of every sample, in sample order.
    fn labels(&self) -> &[usize];

    /// Materializes the samples at `indices`. Samples that fail to load are
    /// skipped; a batch with no loadable sample is an error.
    fn load(&self, indices: &[usize], ctx: &LoadContext) -> Result<Batch>;
}

/// Sample indices for one epoch, shuffled by `(seed, epoch)` and cut into
/// batches; the final partial batch is kept.
pub fn batch_order(len: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = seed::stream(seed, &[STREAM_SHUFFLE, epoch as u64]);
    order.shuffle(&mut rng);
    order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Pre-built network inputs; no augmentation.
#[derive(Debug, Clone)]
pub struct TensorDataset {
    images: Tensor,
    labels: Vec<usize>,
}

impl TensorDataset {
    pub fn new(images: Tensor, labels: Vec<usize>) -> Result<Self> {
        if images.rank() != 4 || images.shape()[0] != labels.len() {
            return Err(Error::Shape(format!(
                "dataset tensor {:?} does not hold {} samples",
                images.shape(),
                labels.len()
            )));
        }
        Ok(Self { images, labels })
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }
}

impl BatchSource for TensorDataset {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn load(&self, indices: &[usize], _ctx: &LoadContext) -> Result<Batch> {
        let shape = self.images.shape();
        let per = shape[1] * shape[2] * shape[3];
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let Some(&l) = self.labels.get(i) else {
                return Err(Error::Validation(format!("sample index {i} out of range")));
            };
            data.extend_from_slice(&self.images.data()[i * per..][..per]);
            labels.push(l);
        }
        if labels.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        Ok(Batch {
            images: Tensor::new(&[labels.len(), shape[1], shape[2], shape[3]], data)?,
            labels,
        })
    }
}

#[derive(Debug, Clone)]
enum ImageStore {
    Files(Vec<PathBuf>),
    Memory(Vec<ImageU8>),
}

/// RGB images that are augmented (training only), enhanced and stacked on
/// demand.
#[derive(Debug, Clone)]
pub struct ImageDataset {
    store: ImageStore,
    labels: Vec<usize>,
    enhance: EnhanceConfig,
    augment: AugmentConfig,
}

impl ImageDataset {
    pub fn from_manifest(
        manifest: &Manifest,
        enhance: EnhanceConfig,
        augment: AugmentConfig,
    ) -> Self {
        Self {
            store: ImageStore::Files(manifest.entries.iter().map(|e| e.path.clone()).collect()),
            labels: manifest.labels(),
            enhance,
            augment,
        }
    }

    pub fn from_images(
        images: Vec<ImageU8>,
        labels: Vec<usize>,
        enhance: EnhanceConfig,
        augment: AugmentConfig,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        Ok(Self {
            store: ImageStore::Memory(images),
            labels,
            enhance,
            augment,
        })
    }

    fn raw(&self, i: usize) -> Result<ImageU8> {
        match &self.store {
            ImageStore::Files(paths) => load_rgb(&paths[i]),
            ImageStore::Memory(images) => Ok(images[i].clone()),
        }
    }

    /// The enhanced gray image for sample `i` under `ctx`.
    pub fn prepare(&self, i: usize, ctx: &LoadContext) -> Result<ImageU8> {
        let mut img = self.raw(i)?;
        if ctx.train && ctx.augment {
            img = augment_sample(&img, &self.augment, ctx.seed, ctx.epoch, i);
        }
        Ok(enhance_pipeline(&img, &self.enhance)?.image)
    }
}

impl BatchSource for ImageDataset {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn load(&self, indices: &[usize], ctx: &LoadContext) -> Result<Batch> {
        let mut images = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        let mut skipped = 0usize;
        for &i in indices {
            if i >= self.labels.len() {
                return Err(Error::Validation(format!("sample index {i} out of range")));
            }
            match self.prepare(i, ctx) {
                Ok(img) => {
                    images.push(img);
                    labels.push(self.labels[i]);
                }
                Err(e @ (Error::Image { .. } | Error::Io { .. })) => {
                    log::warn!("skipping sample {i}: {e}");
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if images.is_empty() {
            return Err(Error::Validation(format!(
                "every sample in a batch of {} failed to load",
                indices.len()
            )));
        }
        if skipped > 0 {
            log::warn!("{skipped} of {} samples skipped", indices.len());
        }
        Ok(Batch {
            images: to_network_input(&images)?,
            labels,
        })
    }
}
