//! Fixed-architecture feed-forward networks.
//!
//! Layers are affine maps followed by an element-wise activation. Forward
//! passes operate on row batches (one sample per row) and record a cache
//! from which [`DenseNet::backward`] computes exact parameter and input
//! gradients for the realized activations.

mod activation;
mod adam;
mod checkpoint;
mod net;

pub use activation::{Activation, Mode, LEAKY_RELU_SLOPE, RRELU_EVAL_SLOPE, RRELU_LOWER, RRELU_UPPER};
pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use net::{Dense, DenseNet, ForwardCache, GradientBundle};
