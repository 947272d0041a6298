//! Experience stores used during training.
//!
//! * [`ReplayBuffer`]: FIFO store of RL transitions, sampled uniformly.
//! * [`ReservoirBuffer`]: best-response state/action pairs kept as a uniform
//!   sample of everything ever inserted.
//! * [`SelfImitationBuffer`]: steps of the best episodes seen so far, gated on
//!   social welfare and sampled in proportion to their return.

mod replay;
mod reservoir;
mod self_imitation;

pub use replay::ReplayBuffer;
pub use reservoir::ReservoirBuffer;
pub use self_imitation::{
    compute_returns, ConsiderOutcome, EpisodeStep, ReturnTransition, SelfImitationBuffer, PRIORITY_FLOOR,
};

/// One step of experience for a single agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// A state and the action the best-response policy took there.
#[derive(Clone, Debug, PartialEq)]
pub struct BestResponsePair {
    pub state: Vec<f64>,
    pub action: usize,
}
