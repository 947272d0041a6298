use std::collections::VecDeque;
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};

/// Smallest sampling priority; returns can be zero or negative.
pub const PRIORITY_FLOOR: f64 = 1e-3;

/// Discounted return-to-go of every step: `R_t = r_t + gamma * R_{t+1}`.
pub fn compute_returns(rewards: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must be in (0, 1], got {gamma}")));
    }
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (r, out) in rewards.iter().zip(returns.iter_mut()).rev() {
        acc = r + gamma * acc;
        *out = acc;
    }
    Ok(returns)
}

/// One agent step of a finished episode, annotated with its return-to-go.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStep {
    pub agent: usize,
    pub state: Vec<f64>,
    pub action: usize,
    pub ret: f64,
    pub next_state: Vec<f64>,
}

/// A stored self-imitation experience.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnTransition {
    pub agent: usize,
    pub state: Vec<f64>,
    pub action: usize,
    pub ret: f64,
    pub next_state: Vec<f64>,
    /// Social welfare of the episode the step came from.
    pub welfare: f64,
    pub priority: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConsiderOutcome {
    pub reset: bool,
    pub stored: usize,
}

/// Prioritized buffer holding only steps of episodes whose welfare reached the
/// best welfare seen so far. A strictly better episode clears the buffer and
/// raises the threshold.
#[derive(Clone, Debug)]
pub struct SelfImitationBuffer {
    entries: VecDeque<ReturnTransition>,
    best_welfare: f64,
    capacity: usize,
    resets: u64,
}

impl SelfImitationBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("self-imitation capacity must be > 0".into()));
        }
        Ok(Self {
            entries: VecDeque::new(),
            best_welfare: f64::NEG_INFINITY,
            capacity,
            resets: 0,
        })
    }

    /// Welfare threshold `W_T`; `-inf` until the first episode.
    pub fn best_welfare(&self) -> f64 {
        self.best_welfare
    }

    pub fn resets(&self) -> u64 {
        self.resets
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &ReturnTransition> {
        self.entries.iter()
    }

    /// End-of-episode protocol: reset on strict improvement, then store the
    /// episode if its welfare reaches the (possibly raised) threshold.
    pub fn consider_episode(&mut self, steps: Vec<EpisodeStep>, welfare: f64) -> ConsiderOutcome {
        let mut outcome = ConsiderOutcome {
            reset: false,
            stored: 0,
        };
        if welfare > self.best_welfare {
            self.entries.clear();
            self.best_welfare = welfare;
            self.resets += 1;
            outcome.reset = true;
        }
        if welfare >= self.best_welfare {
            for step in steps {
                if self.entries.len() == self.capacity {
                    self.entries.pop_front();
                }
                self.entries.push_back(ReturnTransition {
                    agent: step.agent,
                    priority: step.ret.max(PRIORITY_FLOOR),
                    state: step.state,
                    action: step.action,
                    ret: step.ret,
                    next_state: step.next_state,
                    welfare,
                });
                outcome.stored += 1;
            }
        }
        outcome
    }

    /// `n` draws with replacement, each entry chosen with probability
    /// proportional to its priority.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&ReturnTransition>> {
        if self.entries.is_empty() {
            return Err(Error::NotReady("self-imitation buffer is empty"));
        }
        let dist = WeightedIndex::new(self.entries.iter().map(|e| e.priority))
            .map_err(|e| Error::InvalidArgument(format!("priorities: {e}")))?;
        Ok((0..n).map(|_| &self.entries[dist.sample(rng)]).collect())
    }

    /// Debug dump, one entry per line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "agent\taction\treturn\twelfare\tpriority\tstate\tnext_state")?;
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        for e in &self.entries {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.agent,
                e.action,
                e.ret,
                e.welfare,
                e.priority,
                join(&e.state),
                join(&e.next_state)
            )?;
        }
        Ok(())
    }
}
