//! The CNN-LSTM classifier: layer graph, training and persistence.

mod checkpoint;
mod network;
mod optim;
mod predict;
mod spec;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use network::{build_model, Affine, ForwardCache, ModelState, NormAffine, Params};
pub use optim::{adam_step, AdamState, LrSchedule, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use predict::{argmax_rows, predict, Classifier, Prediction};
pub use spec::{LayerKind, ModelSpec, ShapeTrace, TraceRow};
pub use train::{evaluate, fit, train_epoch, EpochRecord, Evaluation, History, TrainConfig};
