//! Core of a multi-scale, multi-encoder ensemble image classifier.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std` (only `alloc` is required):
//!
//! - [`tensor`] and [`ops`]: a dense B×H×W×C tensor and the differentiable
//!   operator set, each with an explicit vector-Jacobian-product backward.
//! - [`blocks`]: residual bottleneck blocks, depthwise-separable entry/middle/exit
//!   flows and the fully connected prediction head.
//! - [`model`]: the two-encoder network with its five heads and averaged output.
//! - [`data`]: stratified fold planning, class weights, resizing, augmentation
//!   and batch assembly.
//! - [`train`]: Adam, plateau learning-rate schedule and the fit loop.
//! - [`eval`]: confusion matrices and recall/precision/F1/accuracy reporting.
//! - [`verify`]: shape conformance and finite-difference gradient suites.
//!
//! File formats, dataset scanning and the command line live in the `cvrnet`
//! companion crate.

#![no_std]
// `!(x > 0.0)` deliberately rejects NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::large_enum_variant)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod blocks;
pub mod check;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod ops;
pub mod params;
pub mod scalar;
pub mod seed;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use model::{HeadOutputs, Model, ModelConfig};
pub use ops::Mode;
pub use params::{ParamId, ParamStore};
pub use scalar::{DType, Scalar};
pub use tensor::Tensor;
