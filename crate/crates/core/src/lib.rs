//! Backprojection training for feedforward networks.
//!
//! Instead of propagating a single end-to-end error signal, backprojection
//! tunes one layer at a time: the batch is projected forward to the layer's
//! input, the labels are reconstructed backward through the upper layers'
//! weights and inverse activations, and the layer takes one gradient step to
//! make its output match that reconstruction. Kernel backprojection runs the
//! same procedure on normalized kernel vectors, and a conventional
//! backpropagation trainer over the same layer stack is included as a baseline.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, timing, and the
//! experiment runner live in the `backprojection` companion crate.
//!
//! # Layout
//!
//! - [`activation`], [`loss`]: elementwise building blocks with inverses and gradients.
//! - [`network`]: the layer stack, forward projection, and label backprojection.
//! - [`gradient`]: per-layer loss and gradient, plus Kronecker and finite-difference oracles.
//! - [`trainer`]: single-layer updates and the forward / backward / forward-backward procedures.
//! - [`backprop`]: the end-to-end baseline.
//! - [`kernel`]: kernel matrices, normalization, and test-time kernel vectors.
//! - [`data`]: blob generation, standardization, and label encoding.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod activation;
pub mod backprop;
pub mod data;
pub mod error;
pub mod gradient;
pub mod kernel;
pub mod loss;
pub mod matrix;
pub mod network;
pub mod trainer;

pub use activation::ActivationKind;
pub use backprop::train_backpropagation;
pub use data::{encode_labels, generate_blobs, standardize, Dataset, Standardization};
pub use error::{Error, Result};
pub use gradient::{finite_difference_gradient, kronecker_layer_gradient, layer_gradient, Batch};
pub use kernel::{kernel_matrix, normalize_kernel, KernelKind, KernelModel};
pub use loss::LossKind;
pub use matrix::Matrix;
pub use network::{Layer, LayerShape, LayerSpec, Network};
pub use trainer::{
    train_backprojection, update_layer_weights, Procedure, TrainConfig, TrainMonitor, TrainReport,
    TrainingSet, UpdateRecord,
};
