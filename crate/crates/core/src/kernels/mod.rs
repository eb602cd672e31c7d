//! Differentiable numerical primitives with hand-written backward passes.
//!
//! Every kernel is a pure function of its arguments; running statistics and
//! random seeds are passed in explicitly.

mod activation;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod norm;
mod pool;

pub(crate) use activation::sigmoid as activation_sigmoid;
pub use activation::{activation_backward, activation_forward, softmax_rows, Activation};
pub use conv::{conv2d_backward, conv2d_forward, conv2d_param_count, KERNEL_SIZE};
pub use dense::{dense_backward, dense_forward, dense_param_count};
pub use dropout::{dropout_backward, dropout_forward, DropoutMask};
pub use gradcheck::{central_difference, finite_difference_check, relative_error, sample_coords};
pub use loss::softmax_cross_entropy;
pub use norm::{
    batch_norm_backward, batch_norm_forward_infer, batch_norm_forward_train, BatchNormCache,
    RunningStats, BN_EPSILON, BN_MOMENTUM,
};
pub use pool::{maxpool2d_backward, maxpool2d_forward, PoolOutput};

use crate::tensor::Tensor;

/// Training or inference behaviour for layers that differ between the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

/// Gradients of a parameterised kernel, each shaped like its primal.
#[derive(Debug, Clone)]
pub struct KernelGrads {
    pub d_input: Tensor,
    pub d_weights: Tensor,
    pub d_bias: Tensor,
}
