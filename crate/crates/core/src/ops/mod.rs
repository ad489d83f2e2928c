//! Differentiable operators.
//!
//! Every operator is a pure forward function plus a `*_backward` function
//! computing the vector-Jacobian product for a given output cotangent. There
//! is no tape: blocks keep whatever forward values their backward needs and
//! chain the calls themselves.
//!
//! Loops run in a fixed sequential order, so identical inputs give
//! bit-identical outputs.

mod conv;
mod dense;
mod elementwise;
mod loss;
mod norm;
mod pool;

use serde::{Deserialize, Serialize};

pub use conv::{
    conv2d, conv2d_backward, depthwise_conv2d, depthwise_conv2d_backward,
    depthwise_separable_conv, depthwise_separable_conv_backward, ConvGrads, ConvSpec, Padding,
    SeparableGrads,
};
pub use dense::{dense, dense_backward, DenseGrads};
pub use elementwise::{add, concat_channels, relu, relu_backward, split_channels};
pub use loss::{one_hot, softmax, softmax_cross_entropy, softmax_cross_entropy_backward, LossOutput};
pub use norm::{batch_norm, batch_norm_backward, BatchNormCache, BatchNormGrads, BatchNormOutput};
pub use pool::{
    global_avg_pool, global_avg_pool_backward, maxpool2d, maxpool2d_backward, maxpool2d_indexed,
    MaxPoolOutput,
};

/// Train mode normalizes with batch statistics; infer mode with running ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}
