//! Networks, behaviour policies and losses for NFSP, NFSIP and AC-SIL.
//!
//! All agents of a run share one action-value network, one target copy of it
//! and one average-policy network; agents are told apart by a one-hot id in
//! their observation.

mod acsil;
pub mod gradcheck;
mod losses;

use rand::Rng;

use crate::error::Result;
use crate::neural::{predict, softmax, Architecture, Optimizer, OptimizerKind, ParameterSet};

pub use acsil::{acsil_losses, acsil_update, AcSilStats, OnPolicyStep};
pub use losses::{
    clipped_advantage, effective_mixing_coefficient, pi_loss, q_loss, sil_advantages, sil_pi_loss,
    sil_pi_loss_with_advantages, sil_q_loss, sil_q_update, state_value, Baseline, LossOutput, SilQGradient,
    SilQOutput,
};

/// Shared parameters of all agents in one run.
#[derive(Clone, Debug)]
pub struct AgentNetworks {
    pub q: ParameterSet,
    pub target_q: ParameterSet,
    pub policy: ParameterSet,
    pub q_optimizer: Optimizer,
    pub policy_optimizer: Optimizer,
}

impl AgentNetworks {
    /// Fresh networks; the target starts as a copy of the action-value network.
    pub fn new<R: Rng + ?Sized>(
        observation_len: usize,
        num_actions: usize,
        hidden: &[usize],
        optimizer: OptimizerKind,
        rng: &mut R,
    ) -> Result<Self> {
        let arch = Architecture::new(observation_len, hidden.to_vec(), num_actions)?;
        let q = ParameterSet::init(arch.clone(), rng);
        let policy = ParameterSet::init(arch, rng);
        Ok(Self::from_params(q, policy, optimizer))
    }

    pub fn from_params(q: ParameterSet, policy: ParameterSet, optimizer: OptimizerKind) -> Self {
        Self {
            target_q: q.clone(),
            q_optimizer: Optimizer::for_params(optimizer, &q),
            policy_optimizer: Optimizer::for_params(optimizer, &policy),
            q,
            policy,
        }
    }

    /// Hard copy of the action-value parameters into the target network.
    pub fn sync_target(&mut self) {
        self.target_q
            .copy_from(&self.q)
            .expect("target and online networks share an architecture");
    }

    pub fn num_actions(&self) -> usize {
        self.q.architecture().output
    }

    pub fn policy_probabilities(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&predict(&self.policy, obs)?))
    }
}

/// Which of the two strategies drives behaviour for an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BehaviorMode {
    /// epsilon-greedy over the action-value network
    BestResponse,
    /// sample from the average-policy network
    AveragePolicy,
}

impl BehaviorMode {
    /// Best response with probability `eta`.
    pub fn sample<R: Rng + ?Sized>(eta: f64, rng: &mut R) -> Self {
        if rng.gen::<f64>() < eta {
            BehaviorMode::BestResponse
        } else {
            BehaviorMode::AveragePolicy
        }
    }
}

/// How the anticipatory parameter evolves over episodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EtaSchedule {
    Fixed,
    /// `eta_0 * timescale / (timescale + episode)`, which goes to zero like `1/t`.
    Harmonic { timescale: f64 },
}

/// Anticipatory parameter and exploration rate.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingSchedule {
    pub eta_initial: f64,
    pub eta: f64,
    pub eta_schedule: EtaSchedule,
    pub epsilon: f64,
    pub decay_factor: f64,
    /// Decay epsilon every this many steps (or episodes, depending on the trainer setting).
    pub decay_interval: u64,
}

impl MixingSchedule {
    pub fn new(eta: f64, epsilon: f64, decay_factor: f64, decay_interval: u64) -> Self {
        Self {
            eta_initial: eta,
            eta,
            eta_schedule: EtaSchedule::Fixed,
            epsilon,
            decay_factor,
            decay_interval,
        }
    }

    /// Called once per counter tick; returns true when epsilon was decayed.
    pub fn tick(&mut self, counter: u64) -> bool {
        if self.decay_interval > 0 && counter > 0 && counter % self.decay_interval == 0 {
            self.epsilon = (self.epsilon * self.decay_factor).clamp(0.0, 1.0);
            true
        } else {
            false
        }
    }

    /// Update eta for the given episode index.
    pub fn set_episode(&mut self, episode: u64) {
        self.eta = match self.eta_schedule {
            EtaSchedule::Fixed => self.eta_initial,
            EtaSchedule::Harmonic { timescale } => self.eta_initial * timescale / (timescale + episode as f64),
        }
        .clamp(0.0, 1.0);
    }
}

impl Default for MixingSchedule {
    fn default() -> Self {
        Self::new(0.2, 0.5, 0.98, 500)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Uniform action with probability `epsilon`, greedy otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_row: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_row.len())
    } else {
        argmax(q_row)
    }
}

/// Draw an index from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave acc a hair below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn select_action<R: Rng + ?Sized>(
    mode: BehaviorMode,
    obs: &[f64],
    nets: &AgentNetworks,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    Ok(match mode {
        BehaviorMode::BestResponse => epsilon_greedy(&predict(&nets.q, obs)?, epsilon, rng),
        BehaviorMode::AveragePolicy => sample_categorical(&nets.policy_probabilities(obs)?, rng),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_picks_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(epsilon_greedy(&[1.0, 5.0, 2.0, 0.0, 0.0, 0.0], 0.0, &mut rng), 1);
        assert_eq!(argmax(&[3.0, 3.0, 1.0]), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            counts[epsilon_greedy(&[1.0, 5.0, 2.0, 0.0, 0.0, 0.0], 1.0, &mut rng)] += 1;
        }
        let p = 1.0 / 6.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn average_mode_follows_one_hot_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Architecture::new(2, vec![], 6).unwrap();
        let mut policy = ParameterSet::zeroed(arch.clone());
        policy.layer_mut(0).bias[3] = 60.0;
        let nets = AgentNetworks::from_params(ParameterSet::zeroed(arch), policy, OptimizerKind::Plain);
        let hits = (0..1000)
            .filter(|_| select_action(BehaviorMode::AveragePolicy, &[0.3, 0.1], &nets, 0.0, &mut rng).unwrap() == 3)
            .count();
        assert_eq!(hits, 1000);
    }

    #[test]
    fn best_response_uses_q_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Architecture::new(2, vec![], 6).unwrap();
        let mut q = ParameterSet::zeroed(arch.clone());
        q.layer_mut(0).bias.copy_from_slice(&[1.0, 5.0, 2.0, 0.0, 0.0, 0.0]);
        let nets = AgentNetworks::from_params(q, ParameterSet::zeroed(arch), OptimizerKind::Plain);
        assert_eq!(select_action(BehaviorMode::BestResponse, &[0.0, 0.0], &nets, 0.0, &mut rng).unwrap(), 1);
    }

    #[test]
    fn behaviour_mode_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..100).all(|_| BehaviorMode::sample(1.0, &mut rng) == BehaviorMode::BestResponse));
        assert!((0..100).all(|_| BehaviorMode::sample(0.0, &mut rng) == BehaviorMode::AveragePolicy));
    }

    #[test]
    fn epsilon_decay_schedule() {
        let mut s = MixingSchedule::default();
        for t in 1..500 {
            assert!(!s.tick(t));
        }
        assert_eq!(s.epsilon, 0.5);
        assert!(s.tick(500));
        assert!((s.epsilon - 0.49).abs() < 1e-15);
        for t in 501..=1000 {
            s.tick(t);
        }
        assert!((s.epsilon - 0.4802).abs() < 1e-12);
    }

    #[test]
    fn harmonic_eta_goes_to_zero() {
        let mut s = MixingSchedule::default();
        s.eta_schedule = EtaSchedule::Harmonic { timescale: 100.0 };
        s.set_episode(0);
        assert_eq!(s.eta, 0.2);
        s.set_episode(100);
        assert!((s.eta - 0.1).abs() < 1e-15);
        s.set_episode(1_000_000);
        assert!(s.eta < 1e-4);
    }

    #[test]
    fn categorical_sampling_handles_rounding() {
        use rand::rngs::mock::StepRng;
        let mut rng = StepRng::new(u64::MAX, 0);
        assert_eq!(sample_categorical(&[0.5, 0.5 - 1e-16, 0.0], &mut rng), 1);
    }
}
