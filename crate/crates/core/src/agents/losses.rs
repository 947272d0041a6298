//! Loss values and their gradients.
//!
//! Every loss is a batch mean. Gradients are exact for the stated loss with
//! the documented stop-gradients: the target network in the Q loss, the
//! policy inside a policy-weighted baseline, and the clipped advantage in the
//! self-imitation policy loss.

use crate::buffers::{BestResponsePair, ReturnTransition, Transition};
use crate::error::{Error, Result};
use crate::neural::{backward_into, forward, log_softmax_at, predict, softmax, GradientSet, ParameterSet};

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: GradientSet,
}

/// State-value estimate used as the self-imitation baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    /// `V(s) = mean_a Q(s, a)`
    Uniform,
    /// `V(s) = sum_a pi(s, a) Q(s, a)`
    PolicyWeighted,
}

impl std::fmt::Display for Baseline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Baseline::Uniform => "uniform",
            Baseline::PolicyWeighted => "policy",
        })
    }
}

impl std::str::FromStr for Baseline {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(Baseline::Uniform),
            "policy" => Ok(Baseline::PolicyWeighted),
            _ => Err(format!("unknown baseline {s:?} (uniform, policy)")),
        }
    }
}

/// How the self-imitation value loss moves the action-value network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SilQGradient {
    /// Raise `Q(s, a)` of the imitated action only, scaled by its baseline weight.
    TakenAction,
    /// Exact gradient of the loss through every action in `V(s)`.
    Exact,
}

impl std::fmt::Display for SilQGradient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SilQGradient::TakenAction => "taken",
            SilQGradient::Exact => "exact",
        })
    }
}

impl std::str::FromStr for SilQGradient {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "taken" => Ok(SilQGradient::TakenAction),
            "exact" => Ok(SilQGradient::Exact),
            _ => Err(format!("unknown self-imitation gradient {s:?} (taken, exact)")),
        }
    }
}

fn nonempty<T>(batch: &[T], what: &'static str) -> Result<()> {
    if batch.is_empty() {
        Err(Error::NotReady(what))
    } else {
        Ok(())
    }
}

fn check_action(action: usize, num_actions: usize) -> Result<()> {
    if action >= num_actions {
        return Err(Error::InvalidArgument(format!(
            "action {action} out of range 0..{num_actions}"
        )));
    }
    Ok(())
}

pub fn state_value(q_row: &[f64], policy_row: &[f64], baseline: Baseline) -> f64 {
    match baseline {
        Baseline::Uniform => q_row.iter().sum::<f64>() / q_row.len() as f64,
        Baseline::PolicyWeighted => q_row.iter().zip(policy_row).map(|(q, p)| q * p).sum(),
    }
}

/// `max(0, R - V)` when the episode's welfare reached the threshold, else 0.
pub fn clipped_advantage(ret: f64, value: f64, welfare: f64, threshold: f64) -> f64 {
    if welfare >= threshold {
        (ret - value).max(0.0)
    } else {
        0.0
    }
}

/// Policy mixing weight implied by one self-imitation update at iteration `t`.
pub fn effective_mixing_coefficient(t: u64, gamma_clip: f64) -> f64 {
    (1.0 + gamma_clip) / (t as f64 + 1.0)
}

/// Mean of `(r + discount * max_a' Q'(s', a') - Q(s, a))^2`; the bootstrap
/// term is dropped for terminal transitions and carries no gradient.
pub fn q_loss(q: &ParameterSet, target_q: &ParameterSet, batch: &[&Transition], discount: f64) -> Result<LossOutput> {
    nonempty(batch, "empty Q-loss batch")?;
    let n = batch.len() as f64;
    let num_actions = q.architecture().output;
    let mut grad = GradientSet::zeros_like(q);
    let mut loss = 0.0;
    let mut out_grad = vec![0.0; num_actions];
    for t in batch {
        check_action(t.action, num_actions)?;
        let bootstrap = if t.terminal {
            0.0
        } else {
            let next = predict(target_q, &t.next_state)?;
            discount * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let (row, trace) = forward(q, &t.state)?;
        let td = t.reward + bootstrap - row[t.action];
        loss += td * td;
        out_grad.iter_mut().for_each(|g| *g = 0.0);
        out_grad[t.action] = -2.0 * td / n;
        backward_into(q, &trace, &out_grad, &mut grad)?;
    }
    Ok(LossOutput { loss: loss / n, grad })
}

/// Mean negative log-likelihood of the stored best-response actions.
pub fn pi_loss(policy: &ParameterSet, batch: &[&BestResponsePair]) -> Result<LossOutput> {
    nonempty(batch, "empty policy-loss batch")?;
    let weighted: Vec<(&[f64], usize, f64)> = batch.iter().map(|p| (p.state.as_slice(), p.action, 1.0)).collect();
    weighted_nll(policy, &weighted)
}

/// Mean of `-w * log pi(s, a)` with constant weights `w`.
fn weighted_nll(policy: &ParameterSet, batch: &[(&[f64], usize, f64)]) -> Result<LossOutput> {
    let n = batch.len() as f64;
    let num_actions = policy.architecture().output;
    let mut grad = GradientSet::zeros_like(policy);
    let mut loss = 0.0;
    for &(state, action, weight) in batch {
        check_action(action, num_actions)?;
        if weight == 0.0 {
            continue;
        }
        let (logits, trace) = forward(policy, state)?;
        loss -= weight * log_softmax_at(&logits, action);
        // d(-log softmax_a)/d logits = softmax - onehot(a)
        let mut out_grad = softmax(&logits);
        out_grad[action] -= 1.0;
        out_grad.iter_mut().for_each(|g| *g *= weight / n);
        backward_into(policy, &trace, &out_grad, &mut grad)?;
    }
    Ok(LossOutput { loss: loss / n, grad })
}

/// Clipped, welfare-gated advantages `[R - V(s)]_+` for a batch.
pub fn sil_advantages(
    q: &ParameterSet,
    policy: &ParameterSet,
    batch: &[&ReturnTransition],
    threshold: f64,
    baseline: Baseline,
) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|e| {
            let q_row = predict(q, &e.state)?;
            let policy_row = match baseline {
                Baseline::Uniform => Vec::new(),
                Baseline::PolicyWeighted => softmax(&predict(policy, &e.state)?),
            };
            let v = state_value(&q_row, &policy_row, baseline);
            Ok(clipped_advantage(e.ret, v, e.welfare, threshold))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SilQOutput {
    pub loss: LossOutput,
    /// Per-sample clipped advantage at the current parameters.
    pub advantages: Vec<f64>,
}

/// Mean of `([R - V(s)]_+)^2` with gradient through `V`'s dependence on the
/// action-value network. For the policy-weighted baseline the policy is held
/// fixed.
pub fn sil_q_loss(
    q: &ParameterSet,
    policy: &ParameterSet,
    batch: &[&ReturnTransition],
    threshold: f64,
    baseline: Baseline,
) -> Result<SilQOutput> {
    sil_q_update(q, policy, batch, threshold, baseline, SilQGradient::Exact)
}

/// Same loss as [`sil_q_loss`]. With [`SilQGradient::TakenAction`] the
/// gradient is `-2 w_a gamma dQ(s, a)` per sample, `w_a` being the baseline
/// weight of the stored action.
pub fn sil_q_update(
    q: &ParameterSet,
    policy: &ParameterSet,
    batch: &[&ReturnTransition],
    threshold: f64,
    baseline: Baseline,
    mode: SilQGradient,
) -> Result<SilQOutput> {
    nonempty(batch, "empty self-imitation batch")?;
    let n = batch.len() as f64;
    let num_actions = q.architecture().output;
    let mut grad = GradientSet::zeros_like(q);
    let mut loss = 0.0;
    let mut advantages = Vec::with_capacity(batch.len());
    for e in batch {
        check_action(e.action, num_actions)?;
        let (q_row, trace) = forward(q, &e.state)?;
        let policy_row = match baseline {
            Baseline::Uniform => vec![1.0 / num_actions as f64; num_actions],
            Baseline::PolicyWeighted => softmax(&predict(policy, &e.state)?),
        };
        let v = state_value(&q_row, &policy_row, baseline);
        let gamma = clipped_advantage(e.ret, v, e.welfare, threshold);
        advantages.push(gamma);
        if gamma <= 0.0 {
            continue;
        }
        loss += gamma * gamma;
        // dV/dQ(s, .) is the baseline weight vector.
        let out_grad: Vec<f64> = match mode {
            SilQGradient::Exact => policy_row.iter().map(|w| -2.0 * gamma * w / n).collect(),
            SilQGradient::TakenAction => (0..num_actions)
                .map(|a| if a == e.action { -2.0 * gamma * policy_row[a] / n } else { 0.0 })
                .collect(),
        };
        backward_into(q, &trace, &out_grad, &mut grad)?;
    }
    Ok(SilQOutput {
        loss: LossOutput { loss: loss / n, grad },
        advantages,
    })
}

/// Mean of `-log pi(s, a) * gamma` with the given (constant) advantages.
pub fn sil_pi_loss_with_advantages(
    policy: &ParameterSet,
    batch: &[&ReturnTransition],
    advantages: &[f64],
) -> Result<LossOutput> {
    nonempty(batch, "empty self-imitation batch")?;
    if advantages.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            context: "self-imitation advantages",
            expected: batch.len(),
            actual: advantages.len(),
        });
    }
    let weighted: Vec<(&[f64], usize, f64)> = batch
        .iter()
        .zip(advantages)
        .map(|(e, &g)| (e.state.as_slice(), e.action, g))
        .collect();
    weighted_nll(policy, &weighted)
}

/// Self-imitation policy loss with advantages computed from the current networks.
pub fn sil_pi_loss(
    q: &ParameterSet,
    policy: &ParameterSet,
    batch: &[&ReturnTransition],
    threshold: f64,
    baseline: Baseline,
) -> Result<LossOutput> {
    let advantages = sil_advantages(q, policy, batch, threshold, baseline)?;
    sil_pi_loss_with_advantages(policy, batch, &advantages)
}
