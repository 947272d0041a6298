//! Minimal feedforward network with layer normalization and hand-written
//! backpropagation, plus optimizers, checkpoints and a finite-difference oracle.

pub mod checkpoint;
pub mod finite_diff;
pub mod network;
pub mod optim;

pub use checkpoint::Checkpoint;
pub use finite_diff::{finite_difference, finite_difference_gradient, max_relative_error};
pub use network::{
    backward, backward_into, forward, layer_norm, log_softmax_at, predict, softmax, Architecture,
    ForwardTrace, GradientSet, ParameterSet, LAYER_NORM_EPS,
};
pub use optim::{Optimizer, OptimizerKind};
