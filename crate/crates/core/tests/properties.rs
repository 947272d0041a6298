use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nfsip::agents::{clipped_advantage, effective_mixing_coefficient};
use nfsip::buffers::{compute_returns, EpisodeStep, ReplayBuffer, ReservoirBuffer, SelfImitationBuffer};
use nfsip::cli::format_g;
use nfsip::envs::{encode_observation, reset, step, Domain, DomainSpec, Variant, NUM_ACTIONS};
use nfsip::matrixgames::{exact_fictitious_play, MatrixGame, TieRule};
use nfsip::neural::{layer_norm, softmax, Architecture, Checkpoint, ParameterSet};

fn domain() -> impl Strategy<Value = DomainSpec> {
    (0..3usize, any::<bool>(), 2..5usize, 2..5usize, 1..5usize, 1..4usize).prop_map(|(d, v2, w, h, agents, tasks)| {
        let domain = [Domain::BoxPushing, Domain::Firefighting, Domain::SearchRescue][d];
        let variant = if v2 { Variant::V2 } else { Variant::V1 };
        let agents = if domain == Domain::SearchRescue { agents.max(2) } else { agents };
        DomainSpec::benchmark(domain, variant)
            .with_grid(w, h)
            .with_agents(agents)
            .with_tasks(tasks.min(w * h))
    })
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0..500.0f64, 1..12)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn layer_norm_standardizes(x in prop::collection::vec(-100.0..100.0f64, 2..20)) {
        let ones = vec![1.0; x.len()];
        let zeros = vec![0.0; x.len()];
        let y = layer_norm(&x, &ones, &zeros, 1e-5).unwrap();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!(var <= 1.0 + 1e-9);
    }

    #[test]
    fn returns_satisfy_the_recursion(rewards in prop::collection::vec(-10.0..10.0f64, 0..30), gamma in 0.01..=1.0f64) {
        let r = compute_returns(&rewards, gamma).unwrap();
        for t in 0..rewards.len() {
            let next = r.get(t + 1).copied().unwrap_or(0.0);
            prop_assert!((r[t] - (rewards[t] + gamma * next)).abs() < 1e-9);
        }
    }

    #[test]
    fn clipped_advantage_is_nonnegative_and_gated(ret in -50.0..50.0f64, v in -50.0..50.0f64, w in -5.0..5.0f64, wt in -5.0..5.0f64) {
        let g = clipped_advantage(ret, v, w, wt);
        prop_assert!(g >= 0.0);
        if w < wt || ret <= v {
            prop_assert_eq!(g, 0.0);
        } else {
            prop_assert_eq!(g, ret - v);
        }
        let t = (w.abs() * 100.0) as u64;
        prop_assert_eq!(effective_mixing_coefficient(t, g), (1.0 + g) / (t as f64 + 1.0));
    }

    #[test]
    fn replay_keeps_the_most_recent(cap in 1..20usize, n in 0..60usize) {
        let mut b = ReplayBuffer::new(cap).unwrap();
        for i in 0..n {
            b.push(i);
        }
        let kept: Vec<usize> = b.iter().copied().collect();
        let expected: Vec<usize> = (n.saturating_sub(cap)..n).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn reservoir_holds_distinct_seen_items(cap in 1..20usize, n in 0..100usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ReservoirBuffer::new(cap).unwrap();
        for i in 0..n {
            b.push(i, &mut rng);
        }
        prop_assert_eq!(b.len(), n.min(cap));
        prop_assert_eq!(b.seen(), n as u64);
        let mut items: Vec<usize> = b.items().to_vec();
        items.sort_unstable();
        items.dedup();
        prop_assert_eq!(items.len(), n.min(cap));
        prop_assert!(items.iter().all(|&i| i < n));
    }

    #[test]
    fn self_imitation_entries_match_threshold(welfares in prop::collection::vec(-3i32..6, 1..40), cap in 1..30usize) {
        let mut b = SelfImitationBuffer::new(cap).unwrap();
        for (k, w) in welfares.iter().enumerate() {
            let steps = (0..3)
                .map(|i| EpisodeStep { agent: i, state: vec![k as f64], action: 0, ret: *w as f64, next_state: vec![] })
                .collect();
            b.consider_episode(steps, *w as f64);
            prop_assert!(b.len() <= cap);
            prop_assert!(b.entries().all(|e| e.welfare == b.best_welfare()));
        }
        prop_assert_eq!(b.best_welfare(), *welfares.iter().max().unwrap() as f64);
    }

    #[test]
    fn fictitious_play_frequencies_are_distributions(payoffs in prop::collection::vec(0.0..1.0f64, 9), iters in 1..60usize) {
        let g = MatrixGame::new(2, 3, payoffs).unwrap();
        for p in exact_fictitious_play(&g, iters, TieRule::LowestIndex).unwrap() {
            for f in &p.frequencies {
                prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn env_invariants_hold_along_random_rollouts(spec in domain(), seed: u64, actions in prop::collection::vec(0..NUM_ACTIONS, 200)) {
        let mut state = reset(&spec, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.num_agents();
        let mut total = 0.0;
        let mut k = 0;
        while !state.is_terminal(&spec) {
            let joint: Vec<usize> = (0..n).map(|i| actions[(k + i) % actions.len()]).collect();
            k += n;
            let before = state.tasks_remaining();
            let res = step(&spec, &state, &joint, &mut rng).unwrap();
            let finished = before - res.state.tasks_remaining();
            let paid: f64 = res.rewards.iter().sum();
            prop_assert!((paid - finished as f64 * spec.reward).abs() < 1e-9);
            prop_assert!(res.state.agents.iter().all(|a| a.pos.x < spec.width && a.pos.y < spec.height));
            for i in 0..n {
                prop_assert_eq!(encode_observation(&res.state, i).unwrap().len(), nfsip::envs::observation_len(&spec));
            }
            total += paid;
            state = res.state;
        }
        prop_assert!(state.step <= spec.horizon);
        prop_assert!(total <= spec.tasks as f64 * spec.reward + 1e-9);
    }

    #[test]
    fn checkpoint_round_trip(seed: u64, hidden in prop::collection::vec(1..6usize, 1..3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = Architecture::new(3, hidden, 2).unwrap();
        let mut ck = Checkpoint::new();
        ck.insert("net", ParameterSet::init(arch, &mut rng));
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        let back = Checkpoint::read_from(bytes.as_slice()).unwrap();
        let (a, b) = (ck.get("net").unwrap(), back.get("net").unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn format_g_round_trips_to_six_digits(x in -1e9..1e9f64) {
        let s = format_g(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs() + 1e-300);
    }
}
