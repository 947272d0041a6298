//! Finite-difference check of every training loss against its analytic gradient.
//!
//! Each draw builds small random networks and batches, computes the analytic
//! gradient, and compares it entrywise to a central-difference estimate of the
//! same scalar loss. Quantities that the loss treats as constants (the target
//! network, the policy inside a policy-weighted baseline, the clipped
//! advantage in the policy loss) are frozen during differencing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::buffers::{BestResponsePair, ReturnTransition, Transition};
use crate::error::Result;
use crate::neural::{finite_difference_gradient, max_relative_error, predict, softmax, Architecture, ParameterSet};

use super::acsil::{acsil_losses, OnPolicyStep};
use super::losses::{
    pi_loss, q_loss, sil_advantages, sil_pi_loss_with_advantages, sil_q_loss, sil_q_update, Baseline, SilQGradient,
};

pub const TOLERANCE: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error of near-zero entries.
pub const RELATIVE_FLOOR: f64 = 1e-6;

const INPUT: usize = 5;
const HIDDEN: [usize; 2] = [8, 8];
const ACTIONS: usize = 6;
const BATCH: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub name: &'static str,
    pub draws: usize,
    pub max_relative_error: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= TOLERANCE
    }
}

fn random_net(rng: &mut ChaCha8Rng) -> ParameterSet {
    let arch = Architecture::new(INPUT, HIDDEN.to_vec(), ACTIONS).expect("fixed sizes");
    let mut p = ParameterSet::init(arch, rng);
    // Move gains and offsets away from their defaults so their gradients are exercised.
    for l in 0..HIDDEN.len() {
        let view = p.layer_mut(l);
        for g in view.gain.unwrap() {
            *g = rng.gen_range(0.5..1.5);
        }
        for o in view.offset.unwrap() {
            *o = rng.gen_range(-0.3..0.3);
        }
    }
    p
}

fn random_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..INPUT).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_returns(rng: &mut ChaCha8Rng) -> Vec<ReturnTransition> {
    (0..BATCH)
        .map(|_| ReturnTransition {
            agent: 0,
            state: random_state(rng),
            action: rng.gen_range(0..ACTIONS),
            ret: rng.gen_range(-1.0..3.0),
            next_state: random_state(rng),
            welfare: rng.gen_range(0.0..2.0),
            priority: 1.0,
        })
        .collect()
}

fn compare(analytic: &[f64], numeric: &[f64]) -> f64 {
    max_relative_error(analytic, numeric, RELATIVE_FLOOR)
}

/// Run `draws` random draws for every loss; seeds are derived from `seed`.
pub fn run_gradcheck(draws: usize, seed: u64) -> Result<Vec<GradcheckReport>> {
    let names = [
        "q_loss",
        "pi_loss",
        "sil_q_loss(uniform)",
        "sil_q_loss(policy)",
        "sil_pi_loss",
        "acsil_actor",
        "acsil_critic",
        "sil_q_update(taken)",
    ];
    let mut worst = [0.0f64; 8];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threshold = 1.0;
    for _ in 0..draws {
        let q = random_net(&mut rng);
        let target = random_net(&mut rng);
        let policy = random_net(&mut rng);

        let transitions: Vec<Transition> = (0..BATCH)
            .map(|_| Transition {
                state: random_state(&mut rng),
                action: rng.gen_range(0..ACTIONS),
                reward: rng.gen_range(-1.0..1.0),
                next_state: random_state(&mut rng),
                terminal: rng.gen_bool(0.3),
            })
            .collect();
        let batch: Vec<&Transition> = transitions.iter().collect();
        let analytic = q_loss(&q, &target, &batch, 0.99)?;
        let numeric = finite_difference_gradient(|p| q_loss(p, &target, &batch, 0.99).unwrap().loss, &q, FD_STEP);
        worst[0] = worst[0].max(compare(analytic.grad.values(), numeric.values()));

        let pairs: Vec<BestResponsePair> = (0..BATCH)
            .map(|_| BestResponsePair {
                state: random_state(&mut rng),
                action: rng.gen_range(0..ACTIONS),
            })
            .collect();
        let batch: Vec<&BestResponsePair> = pairs.iter().collect();
        let analytic = pi_loss(&policy, &batch)?;
        let numeric = finite_difference_gradient(|p| pi_loss(p, &batch).unwrap().loss, &policy, FD_STEP);
        worst[1] = worst[1].max(compare(analytic.grad.values(), numeric.values()));

        let returns = random_returns(&mut rng);
        let batch: Vec<&ReturnTransition> = returns.iter().collect();
        for (slot, baseline) in [(2, Baseline::Uniform), (3, Baseline::PolicyWeighted)] {
            let analytic = sil_q_loss(&q, &policy, &batch, threshold, baseline)?;
            let numeric = finite_difference_gradient(
                |p| sil_q_loss(p, &policy, &batch, threshold, baseline).unwrap().loss.loss,
                &q,
                FD_STEP,
            );
            worst[slot] = worst[slot].max(compare(analytic.loss.grad.values(), numeric.values()));
        }

        let advantages = sil_advantages(&q, &policy, &batch, threshold, Baseline::PolicyWeighted)?;
        let analytic = sil_pi_loss_with_advantages(&policy, &batch, &advantages)?;
        let numeric = finite_difference_gradient(
            |p| sil_pi_loss_with_advantages(p, &batch, &advantages).unwrap().loss,
            &policy,
            FD_STEP,
        );
        worst[4] = worst[4].max(compare(analytic.grad.values(), numeric.values()));

        let on_policy: Vec<OnPolicyStep> = (0..BATCH)
            .map(|_| OnPolicyStep {
                state: random_state(&mut rng),
                action: rng.gen_range(0..ACTIONS),
                ret: rng.gen_range(-1.0..2.0),
            })
            .collect();
        // With the uniform baseline neither advantage depends on the actor, so
        // the combined actor loss is differentiable as-is.
        let (actor, _, _) = acsil_losses(&policy, &q, &on_policy, &batch, threshold, Baseline::Uniform)?;
        let numeric = finite_difference_gradient(
            |p| {
                acsil_losses(p, &q, &on_policy, &batch, threshold, Baseline::Uniform)
                    .unwrap()
                    .0
                    .loss
            },
            &policy,
            FD_STEP,
        );
        worst[5] = worst[5].max(compare(actor.grad.values(), numeric.values()));

        let (_, critic, _) = acsil_losses(&policy, &q, &on_policy, &batch, threshold, Baseline::PolicyWeighted)?;
        let numeric = finite_difference_gradient(
            |p| {
                acsil_losses(&policy, p, &on_policy, &batch, threshold, Baseline::PolicyWeighted)
                    .unwrap()
                    .1
                    .loss
            },
            &q,
            FD_STEP,
        );
        worst[6] = worst[6].max(compare(critic.grad.values(), numeric.values()));

        // The taken-action update is the gradient of -2 w_a gamma Q(s, a)
        // with the advantage and the baseline weight frozen.
        let analytic = sil_q_update(&q, &policy, &batch, threshold, Baseline::PolicyWeighted, SilQGradient::TakenAction)?;
        let frozen: Vec<f64> = batch
            .iter()
            .zip(&analytic.advantages)
            .map(|(e, g)| Ok(-2.0 * g * softmax(&predict(&policy, &e.state)?)[e.action]))
            .collect::<Result<_>>()?;
        let numeric = finite_difference_gradient(
            |p| {
                batch
                    .iter()
                    .zip(&frozen)
                    .map(|(e, c)| c * predict(p, &e.state).unwrap()[e.action])
                    .sum::<f64>()
                    / batch.len() as f64
            },
            &q,
            FD_STEP,
        );
        worst[7] = worst[7].max(compare(analytic.loss.grad.values(), numeric.values()));
    }
    Ok(names
        .iter()
        .zip(worst)
        .map(|(&name, max_relative_error)| GradcheckReport {
            name,
            draws,
            max_relative_error,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_losses_pass_on_a_few_draws() {
        for report in run_gradcheck(3, 17).unwrap() {
            assert!(report.passed(), "{report:?}");
        }
    }
}
