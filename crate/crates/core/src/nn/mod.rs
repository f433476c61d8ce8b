//! Dense multilayer perceptrons with hand-written backpropagation and Adam.
//!
//! Every network in the agent (policy, reward critic, cost critic and the
//! trajectory validation network) is an [`Mlp`]. The topology is fixed: a
//! chain of affine layers with an elementwise activation after each hidden
//! layer and a linear output. All arithmetic is `f64`.
//!
//! Batched passes use a row-major `batch x features` layout and route the
//! matrix products through `matrixmultiply`; the single-sample
//! [`Mlp::forward`] is a plain loop so that rollouts do not pay for the
//! packing overhead of a GEMM kernel.

mod adam;
mod gaussian;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use gaussian::{entropy, log_prob, sample, sample_with_noise, GaussianAction, LOG_2PI};
pub use mlp::{Activation, ForwardTrace, Gradients, Layer, LayerGrad, Mlp};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite upstream gradient at batch index {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite parameter after optimizer step in array `{array}` at offset {offset} (value {value})")]
    NonFiniteParameter {
        array: String,
        offset: usize,
        value: f64,
    },
    #[error("invalid learning rate {0}")]
    LearningRate(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("malformed parameter export: {0}")]
    Import(String),
}
