//! Independent seeded runs of one configuration and their cross-run statistics.

use rayon::prelude::*;

use crate::cli::ExperimentConfig;
use crate::envs::GridEnv;
use crate::error::Result;
use crate::neural::Checkpoint;

use super::{RunMetrics, Trainer};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub welfare: f64,
    pub running_avg: f64,
    pub seconds: f64,
}

/// Per-episode mean and population variance across runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aggregate {
    pub mean_welfare: Vec<f64>,
    pub var_welfare: Vec<f64>,
    pub mean_running_avg: Vec<f64>,
    pub var_running_avg: Vec<f64>,
}

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

pub fn aggregate(runs: &[RunMetrics]) -> Aggregate {
    let mut out = Aggregate::default();
    let episodes = runs.iter().map(|r| r.welfare.len()).min().unwrap_or(0);
    for e in 0..episodes {
        let (m, v) = mean_var(runs.iter().map(|r| r.welfare[e]));
        out.mean_welfare.push(m);
        out.var_welfare.push(v);
        let (m, v) = mean_var(runs.iter().map(|r| r.running_avg[e]));
        out.mean_running_avg.push(m);
        out.var_running_avg.push(v);
    }
    out
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunMetrics>> {
    run_experiment_with(config, |_, _| Ok(()))
}

/// Run `config.runs` seeded runs in parallel. Run `r` is seeded with
/// `config.seed + r`; `on_episode(r, summary)` is called after every episode.
pub fn run_experiment_with<F>(config: &ExperimentConfig, on_episode: F) -> Result<Vec<RunMetrics>>
where
    F: Fn(usize, &EpisodeSummary) -> Result<()> + Sync,
{
    config.validate()?;
    (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let seed = config.seed.wrapping_add(run as u64);
            let env = GridEnv::new(config.domain.clone(), seed)?;
            let mut trainer = Trainer::new(config.train.clone(), env, seed)?
                .with_window(config.window)
                .with_wallclock(config.record_wallclock);
            trainer.train(config.episodes, |t, summary| {
                on_episode(run, summary)?;
                let done = summary.episode + 1;
                if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 {
                    if let Some(dir) = &config.out {
                        checkpoint_of(t).save(dir.join(format!("{}_run{run}.ckpt", config.train.algo)))?;
                    }
                }
                Ok(())
            })
        })
        .collect()
}

/// Snapshot of a trainer's networks under the names `q`, `target_q`, `policy`.
pub fn checkpoint_of<E: crate::envs::Environment>(trainer: &Trainer<E>) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.insert("q", trainer.state.nets.q.clone());
    ck.insert("target_q", trainer.state.nets.target_q.clone());
    ck.insert("policy", trainer.state.nets.policy.clone());
    ck
}
