//! Training loop for NFSP, NFSIP and AC-SIL.
//!
//! One [`Trainer`] owns a single seeded run: shared networks, the three
//! buffers, the mixing schedule and all random state. Every episode goes
//! through [`Trainer::run_episode`] (rollout with per-step updates) and
//! [`Trainer::end_of_episode`] (self-imitation bookkeeping, the
//! self-imitation phase, schedule decay and target sync).

mod experiment;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    acsil_update, effective_mixing_coefficient, epsilon_greedy, pi_loss, q_loss, sample_categorical,
    select_action, sil_pi_loss_with_advantages, sil_q_update, AgentNetworks, Baseline, BehaviorMode, EtaSchedule,
    MixingSchedule, OnPolicyStep, SilQGradient,
};
use crate::buffers::{
    compute_returns, BestResponsePair, EpisodeStep, ReplayBuffer, ReservoirBuffer, SelfImitationBuffer, Transition,
};
use crate::envs::{social_welfare, Environment};
use crate::error::{Error, Result};
use crate::neural::{predict, softmax, OptimizerKind};

pub use experiment::{aggregate, checkpoint_of, run_experiment, run_experiment_with, Aggregate, EpisodeSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Nfsp,
    Nfsip,
    AcSil,
}

impl Algorithm {
    fn uses_self_imitation(self) -> bool {
        matches!(self, Algorithm::Nfsip | Algorithm::AcSil)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Nfsp => "nfsp",
            Algorithm::Nfsip => "nfsip",
            Algorithm::AcSil => "acsil",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nfsp" => Ok(Algorithm::Nfsp),
            "nfsip" => Ok(Algorithm::Nfsip),
            "acsil" | "ac-sil" => Ok(Algorithm::AcSil),
            _ => Err(format!("unknown algorithm {s:?} (nfsp, nfsip, acsil)")),
        }
    }
}

/// What the epsilon decay interval counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayUnit {
    Steps,
    Episodes,
}

impl std::fmt::Display for DecayUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecayUnit::Steps => "steps",
            DecayUnit::Episodes => "episodes",
        })
    }
}

impl std::str::FromStr for DecayUnit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "steps" => Ok(DecayUnit::Steps),
            "episodes" => Ok(DecayUnit::Episodes),
            _ => Err(format!("unknown decay unit {s:?} (steps, episodes)")),
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub algo: Algorithm,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub eta: f64,
    pub eta_schedule: EtaSchedule,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub decay_interval: u64,
    pub decay_unit: DecayUnit,
    pub lr_policy: f64,
    pub lr_q: f64,
    pub batch_size: usize,
    pub sil_iterations: usize,
    /// Discount for self-imitation returns.
    pub gamma: f64,
    /// Discount on the bootstrap term of the Q loss.
    pub q_discount: f64,
    pub sync_interval: u64,
    /// Transitions in the RL buffer before per-step updates start.
    pub warmup: usize,
    pub rl_capacity: usize,
    pub sl_capacity: usize,
    pub si_capacity: usize,
    pub baseline: Baseline,
    pub sil_q_gradient: SilQGradient,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algo: Algorithm::Nfsip,
            hidden: vec![32, 32],
            optimizer: OptimizerKind::adam(),
            eta: 0.2,
            eta_schedule: EtaSchedule::Fixed,
            epsilon: 0.5,
            epsilon_decay: 0.98,
            decay_interval: 500,
            decay_unit: DecayUnit::Steps,
            lr_policy: 1e-3,
            lr_q: 1e-4,
            batch_size: 32,
            sil_iterations: 5,
            gamma: 0.99,
            q_discount: 1.0,
            sync_interval: 300,
            warmup: 1000,
            rl_capacity: 200_000,
            sl_capacity: 1_000_000,
            si_capacity: 50_000,
            baseline: Baseline::PolicyWeighted,
            sil_q_gradient: SilQGradient::TakenAction,
        }
    }
}

/// Event counts used to check the training schedule.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub env_steps: u64,
    pub rl_pushes: u64,
    pub sl_pushes: u64,
    pub si_inserted: u64,
    pub si_resets: u64,
    pub q_updates: u64,
    pub pi_updates: u64,
    pub sil_rounds: u64,
    pub sil_q_steps: u64,
    pub sil_pi_steps: u64,
    pub acsil_updates: u64,
    pub target_syncs: u64,
    pub epsilon_decays: u64,
}

/// Diagnostics of one self-imitation round.
#[derive(Clone, Debug, PartialEq)]
pub struct SilUpdateLog {
    pub update: u64,
    /// Fictitious-play iteration (episode index) the round belongs to.
    pub iteration: u64,
    pub mean_clipped_advantage: f64,
    pub mixing_coefficient: f64,
    pub q_loss: f64,
    pub pi_loss: f64,
}

/// One agent step recorded during an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentStep {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub mode: BehaviorMode,
    pub env_seed: u64,
    /// `trajectories[agent][t]`
    pub trajectories: Vec<Vec<AgentStep>>,
    pub per_agent_returns: Vec<f64>,
    pub welfare: f64,
    pub q_loss: Option<f64>,
    pub pi_loss: Option<f64>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.trajectories.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-run learning curve and diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub welfare: Vec<f64>,
    pub running_avg: Vec<f64>,
    /// Wall-clock seconds since the run started, or zeros when not recorded.
    pub seconds: Vec<f64>,
    pub q_loss: Vec<Option<f64>>,
    pub pi_loss: Vec<Option<f64>>,
    pub sil_log: Vec<SilUpdateLog>,
    pub counters: Counters,
}

impl RunMetrics {
    /// Mean welfare of the last `n` episodes.
    pub fn final_mean(&self, n: usize) -> f64 {
        let tail = &self.welfare[self.welfare.len().saturating_sub(n)..];
        if tail.is_empty() {
            0.0
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        }
    }
}

/// Mutable state of one run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub nets: AgentNetworks,
    pub rl: ReplayBuffer<Transition>,
    pub sl: ReservoirBuffer<BestResponsePair>,
    pub si: SelfImitationBuffer,
    pub schedule: MixingSchedule,
    pub global_step: u64,
    pub episode: u64,
    pub last_sync_step: u64,
    pub counters: Counters,
    pub sil_log: Vec<SilUpdateLog>,
    rng: ChaCha8Rng,
    sil_rng: ChaCha8Rng,
}

/// A seeded run of one algorithm on one environment.
pub struct Trainer<E: Environment> {
    pub config: TrainConfig,
    pub env: E,
    pub state: TrainState,
    window: usize,
    record_wallclock: bool,
}

pub const DEFAULT_WINDOW: usize = 100;

impl<E: Environment> Trainer<E> {
    pub fn new(config: TrainConfig, env: E, seed: u64) -> Result<Self> {
        validate_train_config(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = AgentNetworks::new(
            env.observation_len(),
            env.num_actions(),
            &config.hidden,
            config.optimizer,
            &mut rng,
        )?;
        let mut sil_rng = ChaCha8Rng::seed_from_u64(seed);
        sil_rng.set_stream(1);
        let mut schedule = MixingSchedule::new(config.eta, config.epsilon, config.epsilon_decay, config.decay_interval);
        schedule.eta_schedule = config.eta_schedule;
        if config.algo == Algorithm::AcSil {
            // Same overall exploration rate as the mixed NFSP behaviour.
            schedule.epsilon = config.eta * config.epsilon;
        }
        let state = TrainState {
            nets,
            rl: ReplayBuffer::new(config.rl_capacity)?,
            sl: ReservoirBuffer::new(config.sl_capacity)?,
            si: SelfImitationBuffer::new(config.si_capacity)?,
            schedule,
            global_step: 0,
            episode: 0,
            last_sync_step: 0,
            counters: Counters::default(),
            sil_log: Vec::new(),
            rng,
            sil_rng,
        };
        Ok(Self {
            config,
            env,
            state,
            window: DEFAULT_WINDOW,
            record_wallclock: false,
        })
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self
    }

    pub fn with_wallclock(mut self, record: bool) -> Self {
        self.record_wallclock = record;
        self
    }

    /// Roll out one episode, storing experience and training every step.
    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        let algo = self.config.algo;
        let n = self.env.num_agents();
        self.state.schedule.set_episode(self.state.episode);
        let env_seed = self.state.rng.gen::<u64>();
        self.env.reset(env_seed)?;
        let mode = match algo {
            Algorithm::AcSil => BehaviorMode::AveragePolicy,
            _ => BehaviorMode::sample(self.state.schedule.eta, &mut self.state.rng),
        };

        let mut trajectories: Vec<Vec<AgentStep>> = vec![Vec::new(); n];
        let mut obs: Vec<Vec<f64>> = (0..n).map(|i| self.env.observe(i)).collect::<Result<_>>()?;
        let (mut q_sum, mut q_count, mut pi_sum, mut pi_count) = (0.0, 0u64, 0.0, 0u64);
        loop {
            let mut actions = Vec::with_capacity(n);
            for o in &obs {
                let eps = self.state.schedule.epsilon;
                let a = match algo {
                    Algorithm::AcSil => {
                        if self.state.rng.gen::<f64>() < eps {
                            self.state.rng.gen_range(0..self.env.num_actions())
                        } else {
                            let probs = softmax(&predict(&self.state.nets.policy, o)?);
                            sample_categorical(&probs, &mut self.state.rng)
                        }
                    }
                    _ => select_action(mode, o, &self.state.nets, eps, &mut self.state.rng)?,
                };
                actions.push(a);
            }
            let (rewards, done) = self.env.step(&actions, &mut self.state.rng)?;
            let next_obs: Vec<Vec<f64>> = (0..n).map(|i| self.env.observe(i)).collect::<Result<_>>()?;

            for i in 0..n {
                if algo != Algorithm::AcSil {
                    self.state.rl.push(Transition {
                        state: obs[i].clone(),
                        action: actions[i],
                        reward: rewards[i],
                        next_state: next_obs[i].clone(),
                        terminal: done,
                    });
                    self.state.counters.rl_pushes += 1;
                    if mode == BehaviorMode::BestResponse {
                        self.state.sl.push(
                            BestResponsePair {
                                state: obs[i].clone(),
                                action: actions[i],
                            },
                            &mut self.state.rng,
                        );
                        self.state.counters.sl_pushes += 1;
                    }
                }
                trajectories[i].push(AgentStep {
                    obs: std::mem::take(&mut obs[i]),
                    action: actions[i],
                    reward: rewards[i],
                    next_obs: next_obs[i].clone(),
                });
            }
            self.state.global_step += 1;
            self.state.counters.env_steps += 1;

            if algo != Algorithm::AcSil {
                let (ql, pl) = self.train_step()?;
                if let Some(l) = ql {
                    q_sum += l;
                    q_count += 1;
                }
                if let Some(l) = pl {
                    pi_sum += l;
                    pi_count += 1;
                }
            }
            if self.config.decay_unit == DecayUnit::Steps && self.state.schedule.tick(self.state.global_step) {
                self.state.counters.epsilon_decays += 1;
            }
            obs = next_obs;
            if done {
                break;
            }
        }

        let per_agent_returns: Vec<f64> = trajectories
            .iter()
            .map(|t| t.iter().map(|s| s.reward).sum())
            .collect();
        Ok(EpisodeRecord {
            episode: self.state.episode,
            mode,
            env_seed,
            welfare: social_welfare(&per_agent_returns),
            per_agent_returns,
            trajectories,
            q_loss: (q_count > 0).then(|| q_sum / q_count as f64),
            pi_loss: (pi_count > 0).then(|| pi_sum / pi_count as f64),
        })
    }

    /// One minibatch update of each network, once the RL buffer is warm.
    fn train_step(&mut self) -> Result<(Option<f64>, Option<f64>)> {
        if self.state.rl.len() < self.config.warmup.max(1) {
            return Ok((None, None));
        }
        let s = &mut self.state;
        let batch = s.rl.sample(self.config.batch_size, &mut s.rng)?;
        let q_out = q_loss(&s.nets.q, &s.nets.target_q, &batch, self.config.q_discount)?;
        s.nets.q_optimizer.step(&mut s.nets.q, &q_out.grad, self.config.lr_q)?;
        s.counters.q_updates += 1;

        let pi = match s.sl.sample(self.config.batch_size, &mut s.rng) {
            Ok(batch) => {
                let out = pi_loss(&s.nets.policy, &batch)?;
                s.nets.policy_optimizer.step(&mut s.nets.policy, &out.grad, self.config.lr_policy)?;
                s.counters.pi_updates += 1;
                Some(out.loss)
            }
            Err(Error::NotReady(_)) => None,
            Err(e) => return Err(e),
        };
        Ok((Some(q_out.loss), pi))
    }

    /// Returns, self-imitation buffer protocol, self-imitation phase, schedule
    /// decay and the periodic target sync.
    pub fn end_of_episode(&mut self, record: &EpisodeRecord) -> Result<()> {
        let algo = self.config.algo;
        if algo.uses_self_imitation() {
            let mut steps = Vec::new();
            for (agent, traj) in record.trajectories.iter().enumerate() {
                let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
                let returns = compute_returns(&rewards, self.config.gamma)?;
                for (s, ret) in traj.iter().zip(returns) {
                    steps.push(EpisodeStep {
                        agent,
                        state: s.obs.clone(),
                        action: s.action,
                        ret,
                        next_state: s.next_obs.clone(),
                    });
                }
            }
            let outcome = self.state.si.consider_episode(steps, record.welfare);
            self.state.counters.si_inserted += outcome.stored as u64;
            self.state.counters.si_resets += outcome.reset as u64;
        }
        if algo == Algorithm::AcSil {
            let mut on_policy = Vec::new();
            for traj in &record.trajectories {
                let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
                let returns = compute_returns(&rewards, self.config.gamma)?;
                for (s, ret) in traj.iter().zip(returns) {
                    on_policy.push(OnPolicyStep {
                        state: s.obs.clone(),
                        action: s.action,
                        ret,
                    });
                }
            }
            acsil_update(
                &mut self.state.nets,
                &on_policy,
                &[],
                self.state.si.best_welfare(),
                self.config.baseline,
                self.config.lr_policy,
                self.config.lr_q,
            )?;
            self.state.counters.acsil_updates += 1;
        }
        if algo.uses_self_imitation() {
            self.sil_phase(self.config.sil_iterations)?;
        }
        if self.config.decay_unit == DecayUnit::Episodes && self.state.schedule.tick(self.state.episode + 1) {
            self.state.counters.epsilon_decays += 1;
        }
        if self.state.global_step - self.state.last_sync_step >= self.config.sync_interval {
            self.sync_target();
        }
        self.state.episode += 1;
        Ok(())
    }

    /// Up to `iterations` rounds of self-imitation updates; stops early when
    /// the buffer is empty. A network is only stepped when its gradient is
    /// nonzero, so rounds where every sample is clipped or gated leave the
    /// parameters untouched.
    pub fn sil_phase(&mut self, iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            let s = &mut self.state;
            let batch = match s.si.sample(self.config.batch_size, &mut s.sil_rng) {
                Ok(b) => b,
                Err(Error::NotReady(_)) => return Ok(()),
                Err(e) => return Err(e),
            };
            let threshold = s.si.best_welfare();
            let q_out = sil_q_update(
                &s.nets.q,
                &s.nets.policy,
                &batch,
                threshold,
                self.config.baseline,
                self.config.sil_q_gradient,
            )?;
            let pi_out = sil_pi_loss_with_advantages(&s.nets.policy, &batch, &q_out.advantages)?;
            let mean_gamma = q_out.advantages.iter().sum::<f64>() / q_out.advantages.len() as f64;
            drop(batch);
            if !q_out.loss.grad.is_zero() {
                s.nets.q_optimizer.step(&mut s.nets.q, &q_out.loss.grad, self.config.lr_q)?;
                s.counters.sil_q_steps += 1;
            }
            if !pi_out.grad.is_zero() {
                s.nets.policy_optimizer.step(&mut s.nets.policy, &pi_out.grad, self.config.lr_policy)?;
                s.counters.sil_pi_steps += 1;
            }
            s.sil_log.push(SilUpdateLog {
                update: s.counters.sil_rounds,
                iteration: s.episode,
                mean_clipped_advantage: mean_gamma,
                mixing_coefficient: effective_mixing_coefficient(s.episode, mean_gamma),
                q_loss: q_out.loss.loss,
                pi_loss: pi_out.loss,
            });
            s.counters.sil_rounds += 1;
        }
        Ok(())
    }

    pub fn sync_target(&mut self) {
        self.state.nets.sync_target();
        self.state.last_sync_step = self.state.global_step;
        self.state.counters.target_syncs += 1;
    }

    /// Train for `episodes` episodes, calling `observer` after each one.
    pub fn train<F>(&mut self, episodes: u64, mut observer: F) -> Result<RunMetrics>
    where
        F: FnMut(&Self, &EpisodeSummary) -> Result<()>,
    {
        let start = Instant::now();
        let mut metrics = RunMetrics::default();
        for _ in 0..episodes {
            let record = self.run_episode()?;
            self.end_of_episode(&record)?;
            metrics.welfare.push(record.welfare);
            let tail = &metrics.welfare[metrics.welfare.len().saturating_sub(self.window)..];
            let avg = tail.iter().sum::<f64>() / tail.len() as f64;
            metrics.running_avg.push(avg);
            let seconds = if self.record_wallclock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            metrics.seconds.push(seconds);
            metrics.q_loss.push(record.q_loss);
            metrics.pi_loss.push(record.pi_loss);
            observer(
                self,
                &EpisodeSummary {
                    episode: record.episode,
                    welfare: record.welfare,
                    running_avg: avg,
                    seconds,
                },
            )?;
        }
        metrics.sil_log = self.state.sil_log.clone();
        metrics.counters = self.state.counters.clone();
        Ok(metrics)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.state.rng
    }

    /// Greedy or epsilon-greedy action from the best-response network.
    pub fn best_response_action(&mut self, obs: &[f64], epsilon: f64) -> Result<usize> {
        let q = predict(&self.state.nets.q, obs)?;
        Ok(epsilon_greedy(&q, epsilon, &mut self.state.rng))
    }
}

pub fn validate_train_config(c: &TrainConfig) -> Result<()> {
    let check = |ok: bool, field: &str, msg: String| if ok { Ok(()) } else { Err(Error::config(field, msg)) };
    check((0.0..=1.0).contains(&c.eta), "eta", format!("must be in [0, 1], got {}", c.eta))?;
    check((0.0..=1.0).contains(&c.epsilon), "epsilon", format!("must be in [0, 1], got {}", c.epsilon))?;
    check(
        (0.0..=1.0).contains(&c.epsilon_decay),
        "epsilon_decay",
        format!("must be in [0, 1], got {}", c.epsilon_decay),
    )?;
    check(c.lr_policy > 0.0 && c.lr_policy.is_finite(), "lr_policy", format!("must be > 0, got {}", c.lr_policy))?;
    check(c.lr_q > 0.0 && c.lr_q.is_finite(), "lr_q", format!("must be > 0, got {}", c.lr_q))?;
    check(c.batch_size > 0, "batch_size", "must be > 0".into())?;
    check(c.gamma > 0.0 && c.gamma <= 1.0, "gamma", format!("must be in (0, 1], got {}", c.gamma))?;
    check(
        (0.0..=1.0).contains(&c.q_discount),
        "q_discount",
        format!("must be in [0, 1], got {}", c.q_discount),
    )?;
    check(c.sync_interval > 0, "sync_interval", "must be > 0".into())?;
    check(c.rl_capacity > 0, "rl_capacity", "must be > 0".into())?;
    check(c.sl_capacity > 0, "sl_capacity", "must be > 0".into())?;
    check(c.si_capacity > 0, "si_capacity", "must be > 0".into())?;
    check(!c.hidden.is_empty() && c.hidden.iter().all(|&h| h > 0), "hidden", "layer sizes must be > 0".into())?;
    if let EtaSchedule::Harmonic { timescale } = c.eta_schedule {
        check(timescale > 0.0, "eta_timescale", format!("must be > 0, got {timescale}"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
