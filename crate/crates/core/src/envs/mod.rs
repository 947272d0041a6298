//! Benchmark environments: box pushing, firefighting and search and rescue on
//! a grid, plus the [`Environment`] interface the trainer drives.

pub mod grid;
pub mod spec;

use rand::Rng;

use crate::error::Result;

pub use grid::{
    encode_observation, observation_len, reset, social_welfare, step, trajectory_line, Action, AgentRecord,
    EnvState, Pos, StepResult, TaskRecord, NUM_ACTIONS,
};
pub use spec::{ActingCounts, AgentKind, Domain, DomainSpec, Level, TaskKind, Variant};

/// Episodic multi-agent environment with a shared discrete action set.
pub trait Environment {
    fn num_agents(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn observation_len(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<()>;
    fn observe(&self, agent: usize) -> Result<Vec<f64>>;
    /// Per-agent rewards and whether the episode is over.
    fn step<R: Rng + ?Sized>(&mut self, actions: &[usize], rng: &mut R) -> Result<(Vec<f64>, bool)>;
    fn tasks_remaining(&self) -> usize {
        0
    }
}

/// A [`DomainSpec`] together with its current state.
#[derive(Clone, Debug)]
pub struct GridEnv {
    spec: DomainSpec,
    state: EnvState,
}

impl GridEnv {
    pub fn new(spec: DomainSpec, seed: u64) -> Result<Self> {
        let state = reset(&spec, seed)?;
        Ok(Self { spec, state })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }
}

impl Environment for GridEnv {
    fn num_agents(&self) -> usize {
        self.spec.num_agents()
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn observation_len(&self) -> usize {
        observation_len(&self.spec)
    }

    fn reset(&mut self, seed: u64) -> Result<()> {
        self.state = reset(&self.spec, seed)?;
        Ok(())
    }

    fn observe(&self, agent: usize) -> Result<Vec<f64>> {
        encode_observation(&self.state, agent)
    }

    fn step<R: Rng + ?Sized>(&mut self, actions: &[usize], rng: &mut R) -> Result<(Vec<f64>, bool)> {
        let out = step(&self.spec, &self.state, actions, rng)?;
        self.state = out.state;
        Ok((out.rewards, out.done))
    }

    fn tasks_remaining(&self) -> usize {
        self.state.tasks_remaining()
    }
}
