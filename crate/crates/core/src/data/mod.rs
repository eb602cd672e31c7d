//! Corpus scanning, stratified splitting and batch iteration.

mod batch;
mod manifest;
mod split;

pub use batch::{
    batch_order, one_hot, Batch, BatchSource, ImageDataset, LoadContext, TensorDataset,
};
pub use manifest::{
    gate_manifest, scan_dataset, ClassLabel, GateDecision, Manifest, ManifestEntry, ScanReport,
    CLASS_COUNT,
};
pub use split::{stratified_split, Split, SplitRecord};
