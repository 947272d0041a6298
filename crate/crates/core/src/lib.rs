//! Neural fictitious self-imitation play (NFSIP) for cooperative multi-agent
//! reinforcement learning with sparse good experiences.
//!
//! The crate contains a small fixed-architecture network with hand-written
//! gradients ([`neural`]), the three experience stores ([`buffers`]), the
//! cooperative grid-world benchmarks ([`envs`]), loss functions and action
//! selection for NFSP, NFSIP and AC-SIL ([`agents`]), the training loop
//! ([`trainer`]), an identical-interest matrix-game convergence suite
//! ([`matrixgames`]) and the experiment command line ([`cli`]).

pub mod agents;
pub mod buffers;
pub mod cli;
pub mod envs;
pub mod error;
pub mod matrixgames;
pub mod neural;
pub mod trainer;

pub use error::{Error, Result};
