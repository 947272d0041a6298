//! Advantage actor-critic with a self-imitation term (AC-SIL baseline).
//!
//! The actor is the policy network and the critic is the action-value
//! network. The on-policy part uses Monte-Carlo returns:
//!
//! ```text
//! actor:  mean  -log pi(s, a) * (R - V(s))      (advantage held constant)
//! critic: mean  (R - Q(s, a))^2
//! ```
//!
//! and the self-imitation part is the same pair of losses NFSIP uses.

use crate::buffers::ReturnTransition;
use crate::error::Result;
use crate::neural::{backward_into, forward, log_softmax_at, softmax, GradientSet, ParameterSet};

use super::losses::{sil_pi_loss_with_advantages, sil_q_loss, state_value, Baseline, LossOutput};
use super::AgentNetworks;

/// One on-policy step with its return-to-go.
#[derive(Clone, Debug, PartialEq)]
pub struct OnPolicyStep {
    pub state: Vec<f64>,
    pub action: usize,
    pub ret: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AcSilStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub sil_actor_loss: f64,
    pub sil_critic_loss: f64,
    pub mean_advantage: f64,
    pub mean_clipped_advantage: f64,
    pub sil_applied: bool,
}

/// Combined actor and critic losses, returned as `(actor, critic, stats)`.
/// An empty `si_batch` leaves only the actor-critic terms.
pub fn acsil_losses(
    actor: &ParameterSet,
    critic: &ParameterSet,
    on_policy: &[OnPolicyStep],
    si_batch: &[&ReturnTransition],
    threshold: f64,
    baseline: Baseline,
) -> Result<(LossOutput, LossOutput, AcSilStats)> {
    let mut actor_grad = GradientSet::zeros_like(actor);
    let mut critic_grad = GradientSet::zeros_like(critic);
    let mut stats = AcSilStats::default();
    if !on_policy.is_empty() {
        let n = on_policy.len() as f64;
        for step in on_policy {
            let (q_row, q_trace) = forward(critic, &step.state)?;
            let (logits, pi_trace) = forward(actor, &step.state)?;
            let probs = softmax(&logits);
            let advantage = step.ret - state_value(&q_row, &probs, baseline);
            stats.mean_advantage += advantage / n;

            stats.actor_loss -= advantage * log_softmax_at(&logits, step.action) / n;
            let mut g = probs;
            g[step.action] -= 1.0;
            g.iter_mut().for_each(|v| *v *= advantage / n);
            backward_into(actor, &pi_trace, &g, &mut actor_grad)?;

            let td = step.ret - q_row[step.action];
            stats.critic_loss += td * td / n;
            let mut g = vec![0.0; q_row.len()];
            g[step.action] = -2.0 * td / n;
            backward_into(critic, &q_trace, &g, &mut critic_grad)?;
        }
    }
    if !si_batch.is_empty() {
        let sil_q = sil_q_loss(critic, actor, si_batch, threshold, baseline)?;
        let sil_pi = sil_pi_loss_with_advantages(actor, si_batch, &sil_q.advantages)?;
        stats.sil_critic_loss = sil_q.loss.loss;
        stats.sil_actor_loss = sil_pi.loss;
        stats.mean_clipped_advantage = sil_q.advantages.iter().sum::<f64>() / si_batch.len() as f64;
        stats.sil_applied = true;
        critic_grad.add_assign(&sil_q.loss.grad)?;
        actor_grad.add_assign(&sil_pi.grad)?;
    }
    Ok((
        LossOutput {
            loss: stats.actor_loss + stats.sil_actor_loss,
            grad: actor_grad,
        },
        LossOutput {
            loss: stats.critic_loss + stats.sil_critic_loss,
            grad: critic_grad,
        },
        stats,
    ))
}

/// One actor-critic step plus the self-imitation step. Networks whose
/// combined gradient is exactly zero are left untouched.
pub fn acsil_update(
    nets: &mut AgentNetworks,
    on_policy: &[OnPolicyStep],
    si_batch: &[&ReturnTransition],
    threshold: f64,
    baseline: Baseline,
    lr_actor: f64,
    lr_critic: f64,
) -> Result<AcSilStats> {
    let (actor, critic, stats) = acsil_losses(&nets.policy, &nets.q, on_policy, si_batch, threshold, baseline)?;
    if !actor.grad.is_zero() {
        nets.policy_optimizer.step(&mut nets.policy, &actor.grad, lr_actor)?;
    }
    if !critic.grad.is_zero() {
        nets.q_optimizer.step(&mut nets.q, &critic.grad, lr_critic)?;
    }
    Ok(stats)
}
