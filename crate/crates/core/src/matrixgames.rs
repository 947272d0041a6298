//! Identical-interest normal-form games.
//!
//! Two uses: an exact fictitious-play oracle, and a one-step episodic
//! [`Environment`] so the neural agents can be trained on the same games and
//! compared against the oracle's optimum.

use rand::Rng;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::trainer::{Algorithm, DecayUnit, TrainConfig, Trainer};
use crate::agents::EtaSchedule;

/// Payoffs indexed by joint action, shared by every player.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixGame {
    players: usize,
    actions: usize,
    /// Row-major: player 0's action is the most significant digit.
    payoffs: Vec<f64>,
}

impl MatrixGame {
    pub fn new(players: usize, actions: usize, payoffs: Vec<f64>) -> Result<Self> {
        if players == 0 || actions == 0 {
            return Err(Error::InvalidArgument("a game needs at least one player and one action".into()));
        }
        let expected = actions
            .checked_pow(players as u32)
            .ok_or_else(|| Error::InvalidArgument("joint action space too large".into()))?;
        if payoffs.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "payoff list",
                expected,
                actual: payoffs.len(),
            });
        }
        if let Some(i) = payoffs.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("payoff {i} is not finite")));
        }
        Ok(Self {
            players,
            actions,
            payoffs,
        })
    }

    /// Two-player game from its payoff matrix.
    pub fn two_player(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("payoff matrix must be square".into()));
        }
        Self::new(2, n, rows.concat())
    }

    /// Two players, `actions` actions each, payoff 1 at `(target, target)` and 0 elsewhere.
    pub fn sparse(actions: usize, target: usize) -> Result<Self> {
        if target >= actions {
            return Err(Error::InvalidArgument(format!("target {target} out of range")));
        }
        let mut payoffs = vec![0.0; actions * actions];
        payoffs[target * actions + target] = 1.0;
        Self::new(2, actions, payoffs)
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn joint_index(&self, joint: &[usize]) -> Result<usize> {
        if joint.len() != self.players {
            return Err(Error::DimensionMismatch {
                context: "joint action",
                expected: self.players,
                actual: joint.len(),
            });
        }
        joint.iter().try_fold(0, |acc, &a| {
            if a < self.actions {
                Ok(acc * self.actions + a)
            } else {
                Err(Error::InvalidArgument(format!("action {a} out of range")))
            }
        })
    }

    pub fn joint_action(&self, mut index: usize) -> Vec<usize> {
        let mut joint = vec![0; self.players];
        for slot in joint.iter_mut().rev() {
            *slot = index % self.actions;
            index /= self.actions;
        }
        joint
    }

    pub fn payoff(&self, joint: &[usize]) -> Result<f64> {
        Ok(self.payoffs[self.joint_index(joint)?])
    }

    /// Joint action with the highest payoff; the lowest index wins ties.
    pub fn optimal_joint_action(&self) -> Vec<usize> {
        let mut best = 0;
        for (i, &p) in self.payoffs.iter().enumerate() {
            if p > self.payoffs[best] {
                best = i;
            }
        }
        self.joint_action(best)
    }

    /// Expected payoff of each of `player`'s actions against the others' mixed strategies.
    pub fn action_values(&self, player: usize, profile: &[Vec<f64>]) -> Vec<f64> {
        let mut values = vec![0.0; self.actions];
        for (index, &payoff) in self.payoffs.iter().enumerate() {
            let joint = self.joint_action(index);
            let weight: f64 = joint
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != player)
                .map(|(j, &a)| profile[j][a])
                .product();
            values[joint[player]] += weight * payoff;
        }
        values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    LowestIndex,
    HighestIndex,
}

/// Per-player action frequencies after some number of iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalProfile {
    pub iteration: usize,
    pub frequencies: Vec<Vec<f64>>,
}

fn best_response(values: &[f64], tie: TieRule) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * max.abs().max(1.0);
    let mut ties = values.iter().enumerate().filter(|&(_, &v)| v >= max - tol).map(|(i, _)| i);
    match tie {
        TieRule::LowestIndex => ties.next(),
        TieRule::HighestIndex => ties.last(),
    }
    .unwrap_or(0)
}

/// Simultaneous fictitious play: at every iteration each player plays an
/// exact best response to the others' empirical frequencies (uniform before
/// the first iteration). Returns the profile after each iteration.
pub fn exact_fictitious_play(game: &MatrixGame, iterations: usize, tie: TieRule) -> Result<Vec<EmpiricalProfile>> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    let (n, m) = (game.players, game.actions);
    let mut counts = vec![vec![0u64; m]; n];
    let mut profile = vec![vec![1.0 / m as f64; m]; n];
    let mut trace = Vec::with_capacity(iterations);
    for it in 1..=iterations {
        let responses: Vec<usize> = (0..n).map(|i| best_response(&game.action_values(i, &profile), tie)).collect();
        for (i, &a) in responses.iter().enumerate() {
            counts[i][a] += 1;
        }
        profile = counts
            .iter()
            .map(|c| c.iter().map(|&k| k as f64 / it as f64).collect())
            .collect();
        trace.push(EmpiricalProfile {
            iteration: it,
            frequencies: profile.clone(),
        });
    }
    Ok(trace)
}

/// A matrix game as a one-step episode. Every player observes a constant
/// vector plus its one-hot id and receives the joint payoff.
#[derive(Clone, Debug)]
pub struct MatrixGameEnv {
    game: MatrixGame,
    done: bool,
}

impl MatrixGameEnv {
    pub fn new(game: MatrixGame) -> Self {
        Self { game, done: false }
    }

    pub fn game(&self) -> &MatrixGame {
        &self.game
    }
}

impl Environment for MatrixGameEnv {
    fn num_agents(&self) -> usize {
        self.game.players
    }

    fn num_actions(&self) -> usize {
        self.game.actions
    }

    fn observation_len(&self) -> usize {
        1 + self.game.players
    }

    fn reset(&mut self, _seed: u64) -> Result<()> {
        self.done = false;
        Ok(())
    }

    fn observe(&self, agent: usize) -> Result<Vec<f64>> {
        if agent >= self.game.players {
            return Err(Error::InvalidArgument(format!("agent {agent} out of range")));
        }
        let mut obs = vec![0.0; self.observation_len()];
        obs[0] = 1.0;
        obs[1 + agent] = 1.0;
        Ok(obs)
    }

    fn step<R: Rng + ?Sized>(&mut self, actions: &[usize], _rng: &mut R) -> Result<(Vec<f64>, bool)> {
        if self.done {
            return Err(Error::Terminal);
        }
        let payoff = self.game.payoff(actions)?;
        self.done = true;
        Ok((vec![payoff; self.game.players], true))
    }
}

/// Settings for training neural agents on a matrix game.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSuiteConfig {
    pub train: TrainConfig,
    pub episodes: u64,
    /// Evaluate the average policies every this many episodes.
    pub eval_every: u64,
    /// Mass on the optimal action every player must reach.
    pub threshold: f64,
}

impl MatrixSuiteConfig {
    /// One-step episodes need a short warm-up and a fast epsilon decay; eta
    /// decays towards zero as generalised weakened fictitious play requires.
    pub fn gwfp(algo: Algorithm) -> Self {
        Self {
            train: TrainConfig {
                algo,
                eta: 0.5,
                eta_schedule: EtaSchedule::Harmonic { timescale: 2000.0 },
                epsilon: 0.5,
                epsilon_decay: 0.95,
                decay_interval: 10,
                decay_unit: DecayUnit::Episodes,
                warmup: 32,
                sync_interval: 20,
                gamma: 1.0,
                ..TrainConfig::default()
            },
            episodes: 5000,
            eval_every: 25,
            threshold: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRun {
    /// Average-policy distribution of every player at the end of training.
    pub profile: Vec<Vec<f64>>,
    /// `(episodes trained, smallest mass on the optimal action across players)`.
    pub trace: Vec<(u64, f64)>,
    /// Episodes trained when every player first reached the threshold.
    pub first_hit: Option<u64>,
}

impl MatrixRun {
    /// First hit, counting runs that never reached the threshold as `budget + 1`.
    pub fn episodes_to_threshold(&self, budget: u64) -> u64 {
        self.first_hit.unwrap_or(budget + 1)
    }
}

fn policy_profile(trainer: &Trainer<MatrixGameEnv>) -> Result<Vec<Vec<f64>>> {
    (0..trainer.env.num_agents())
        .map(|i| trainer.state.nets.policy_probabilities(&trainer.env.observe(i)?))
        .collect()
}

/// Train shared average-policy networks by neural self-play on `game`.
pub fn neural_selfplay_on_matrix_game(game: &MatrixGame, config: &MatrixSuiteConfig, seed: u64) -> Result<MatrixRun> {
    let optimum = game.optimal_joint_action();
    let mut trainer = Trainer::new(config.train.clone(), MatrixGameEnv::new(game.clone()), seed)?;
    let mut trace = Vec::new();
    let mut first_hit = None;
    let every = config.eval_every.max(1);
    let mut trained = 0;
    while trained < config.episodes {
        let chunk = every.min(config.episodes - trained);
        trainer.train(chunk, |_, _| Ok(()))?;
        trained += chunk;
        let profile = policy_profile(&trainer)?;
        let mass = profile
            .iter()
            .zip(&optimum)
            .map(|(p, &a)| p[a])
            .fold(f64::INFINITY, f64::min);
        trace.push((trained, mass));
        if first_hit.is_none() && mass >= config.threshold {
            first_hit = Some(trained);
        }
    }
    Ok(MatrixRun {
        profile: policy_profile(&trainer)?,
        trace,
        first_hit,
    })
}

/// Median of the episodes-to-threshold across runs, with censoring at `budget + 1`.
pub fn median_episodes_to_threshold(runs: &[MatrixRun], budget: u64) -> f64 {
    let mut v: Vec<u64> = runs.iter().map(|r| r.episodes_to_threshold(budget)).collect();
    v.sort_unstable();
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2] as f64,
        n => (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0,
    }
}
