use super::*;
use crate::envs::{Domain, DomainSpec, GridEnv, Variant};

fn small_spec() -> DomainSpec {
    DomainSpec::benchmark(Domain::BoxPushing, Variant::V1)
        .with_grid(3, 3)
        .with_agents(2)
        .with_tasks(2)
}

fn config(algo: Algorithm) -> TrainConfig {
    TrainConfig {
        algo,
        warmup: 20,
        batch_size: 8,
        hidden: vec![8, 8],
        ..TrainConfig::default()
    }
}

fn trainer(algo: Algorithm, seed: u64) -> Trainer<GridEnv> {
    let env = GridEnv::new(small_spec(), seed).unwrap();
    Trainer::new(config(algo), env, seed).unwrap()
}

#[test]
fn updates_start_after_warmup_and_run_every_step() {
    let mut t = trainer(Algorithm::Nfsp, 3);
    let m = t.train(10, |_, _| Ok(())).unwrap();
    let c = &m.counters;
    let agents = 2;
    assert_eq!(c.rl_pushes, c.env_steps * agents);
    // One Q update per step once the buffer holds `warmup` transitions.
    let warm_step = (20 + agents - 1) / agents;
    assert_eq!(c.q_updates, c.env_steps - warm_step + 1);
    assert!(c.pi_updates <= c.q_updates);
    assert_eq!(c.sil_rounds, 0);
    assert_eq!(c.si_inserted, 0);
}

#[test]
fn nfsip_runs_sil_rounds_each_episode() {
    let mut t = trainer(Algorithm::Nfsip, 4);
    let m = t.train(6, |_, _| Ok(())).unwrap();
    assert_eq!(m.counters.sil_rounds, 6 * 5);
    assert_eq!(m.sil_log.len(), 30);
    for log in &m.sil_log {
        let expected = (1.0 + log.mean_clipped_advantage) / (log.iteration as f64 + 1.0);
        assert_eq!(log.mixing_coefficient, expected);
        assert!(log.mean_clipped_advantage >= 0.0);
    }
}

#[test]
fn nfsip_without_sil_rounds_matches_nfsp() {
    let mut a = trainer(Algorithm::Nfsp, 9);
    let mut cfg = config(Algorithm::Nfsip);
    cfg.sil_iterations = 0;
    let mut b = Trainer::new(cfg, GridEnv::new(small_spec(), 9).unwrap(), 9).unwrap();
    let ma = a.train(15, |_, _| Ok(())).unwrap();
    let mb = b.train(15, |_, _| Ok(())).unwrap();
    assert_eq!(ma.welfare, mb.welfare);
    assert_eq!(a.state.nets.q, b.state.nets.q);
    assert_eq!(a.state.nets.policy, b.state.nets.policy);
}

#[test]
fn sync_interval_one_keeps_target_equal() {
    let mut cfg = config(Algorithm::Nfsp);
    cfg.sync_interval = 1;
    let mut t = Trainer::new(cfg, GridEnv::new(small_spec(), 1).unwrap(), 1).unwrap();
    for _ in 0..5 {
        let r = t.run_episode().unwrap();
        t.end_of_episode(&r).unwrap();
        assert_eq!(t.state.nets.q, t.state.nets.target_q);
    }
}

#[test]
fn training_is_deterministic() {
    let run = |algo| trainer(algo, 21).train(8, |_, _| Ok(())).unwrap();
    for algo in [Algorithm::Nfsp, Algorithm::Nfsip, Algorithm::AcSil] {
        assert_eq!(run(algo), run(algo));
    }
}

#[test]
fn acsil_skips_replay_buffers() {
    let mut t = trainer(Algorithm::AcSil, 2);
    let m = t.train(4, |_, _| Ok(())).unwrap();
    assert_eq!(m.counters.rl_pushes, 0);
    assert_eq!(m.counters.acsil_updates, 4);
    assert!(t.state.schedule.epsilon <= 0.1 + 1e-12);
}

#[test]
fn running_average_uses_window() {
    let env = GridEnv::new(small_spec(), 5).unwrap();
    let mut t = Trainer::new(config(Algorithm::Nfsp), env, 5).unwrap().with_window(3);
    let m = t.train(7, |_, _| Ok(())).unwrap();
    for e in 0..7usize {
        let lo = e.saturating_sub(2);
        let w = &m.welfare[lo..=e];
        assert!((m.running_avg[e] - w.iter().sum::<f64>() / w.len() as f64).abs() < 1e-12);
    }
    assert!(m.seconds.iter().all(|&s| s == 0.0));
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = config(Algorithm::Nfsp);
    cfg.eta = 1.5;
    let err = Trainer::new(cfg, GridEnv::new(small_spec(), 0).unwrap(), 0).err().unwrap();
    assert!(err.to_string().contains("eta"));
}

#[test]
fn aggregate_is_mean_and_population_variance() {
    let a = RunMetrics {
        welfare: vec![0.0, 10.0],
        running_avg: vec![0.0, 5.0],
        ..RunMetrics::default()
    };
    let b = RunMetrics {
        welfare: vec![10.0, 10.0],
        running_avg: vec![10.0, 10.0],
        ..RunMetrics::default()
    };
    let agg = aggregate(&[a, b]);
    assert_eq!(agg.mean_welfare, vec![5.0, 10.0]);
    assert_eq!(agg.var_welfare, vec![25.0, 0.0]);
    assert_eq!(agg.mean_running_avg, vec![5.0, 7.5]);
}
