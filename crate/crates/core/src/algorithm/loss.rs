//! Surrogate and unified losses.
//!
//! ```text
//! ρ      = exp(log π_θ(a|s) − log π_old(a|s))
//! l      = min(ρ·Â, clip(ρ, 1−ε, 1+ε)·Â)
//! L_v    = mean (V_φ(s) − (Â + V_old))²
//! L      = −(mean l − β·KL[π_old‖π_θ] + c_H·H[π_θ]) + c_v·L_v + c_T·L_T + c_r·L_r
//! ```

use super::nets::Agent;
use crate::dynamics::TransitionBatch;
use crate::error::{Error, Result};
use crate::numkit::{Array, Gradients, Graph, NodeId, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_ratio: f64,
    pub beta: f64,
    pub entropy_coef: f64,
    pub cv: f64,
    pub ct: f64,
    pub cr: f64,
}

/// Frozen per-sample data for one optimizer step.
#[derive(Debug, Clone)]
pub struct Minibatch {
    /// `[B, obs_dim]`
    pub observations: Array,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    /// `[B, action_count]`
    pub old_logits: Array,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub model: TransitionBatch,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Scalar values of each loss component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub surrogate: f64,
    pub value: f64,
    pub reward: f64,
    pub transition: f64,
    pub kl: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Records `mean min(ρÂ, clip(ρ)Â)` given the current log-probs of the taken actions.
pub fn surrogate_graph(
    graph: &mut Graph,
    log_probs: NodeId,
    old_log_probs: &[f64],
    advantages: &[f64],
    clip_ratio: f64,
) -> Result<NodeId> {
    let old = graph.constant(Array::vector(old_log_probs.to_vec()));
    let adv = graph.constant(Array::vector(advantages.to_vec()));
    let log_ratio = graph.sub(log_probs, old)?;
    let ratio = graph.exp(log_ratio);
    if let Err(e) = graph.value(ratio).check_finite("probability ratio") {
        return Err(Error::NonFinite(format!("surrogate: {e}")));
    }
    let unclipped = graph.mul(ratio, adv)?;
    let clipped_ratio = graph.clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
    let clipped = graph.mul(clipped_ratio, adv)?;
    let per_sample = graph.minimum(unclipped, clipped)?;
    graph.mean(per_sample)
}

/// Value of the clipped surrogate for the policy in `params`.
pub fn surrogate_loss(agent: &Agent, params: &ParamSet, batch: &Minibatch, clip_ratio: f64) -> Result<f64> {
    let mut g = Graph::new();
    let obs = g.constant(batch.observations.clone());
    let (logits, _) = agent.policy.forward_graph(&mut g, params, obs)?;
    let log_pi = g.log_softmax(logits)?;
    let taken = g.gather(log_pi, &batch.actions)?;
    let s = surrogate_graph(&mut g, taken, &batch.old_log_probs, &batch.advantages, clip_ratio)?;
    g.value(s).item()
}

/// Records the unified loss; returns its node and the per-component values.
pub fn unified_loss(
    graph: &mut Graph,
    agent: &Agent,
    params: &ParamSet,
    batch: &Minibatch,
    coef: &LossCoefficients,
) -> Result<(NodeId, LossBreakdown)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::Contract("empty minibatch".into()));
    }
    let obs = graph.constant(batch.observations.clone());
    let (logits, values) = agent.policy.forward_graph(graph, params, obs)?;
    let log_pi = graph.log_softmax(logits)?;
    let taken = graph.gather(log_pi, &batch.actions)?;
    let surrogate = surrogate_graph(graph, taken, &batch.old_log_probs, &batch.advantages, coef.clip_ratio)?;

    // KL[π_old ‖ π_θ] per state.
    let (rows, width) = batch.old_logits.dims2("old logits")?;
    let mut old_lp = Vec::with_capacity(rows * width);
    for r in 0..rows {
        old_lp.extend(crate::numkit::log_softmax(batch.old_logits.row(r)));
    }
    let old_p: Vec<f64> = old_lp.iter().map(|v| v.exp()).collect();
    let old_lp = graph.constant(Array::new(vec![rows, width], old_lp)?);
    let old_p = graph.constant(Array::new(vec![rows, width], old_p)?);
    let log_gap = graph.sub(old_lp, log_pi)?;
    let kl_terms = graph.mul(old_p, log_gap)?;
    let kl_rows = graph.sum_rows(kl_terms)?;
    let kl = graph.mean(kl_rows)?;

    // Σ p log p = −H
    let p = graph.exp(log_pi);
    let plogp = graph.mul(p, log_pi)?;
    let plogp = graph.sum_rows(plogp)?;
    let neg_entropy = graph.mean(plogp)?;

    let targets = graph.constant(Array::vector(batch.value_targets.clone()));
    let v_err = graph.sub(values, targets)?;
    let v_sq = graph.square(v_err);
    let value_loss = graph.mean(v_sq)?;

    let (reward_loss, transition_loss) = agent.dynamics.losses_graph(graph, params, &batch.model)?;

    let mut total = graph.scale(surrogate, -1.0);
    let weighted = [
        (kl, coef.beta),
        (neg_entropy, coef.entropy_coef),
        (value_loss, coef.cv),
        (transition_loss, coef.ct),
        (reward_loss, coef.cr),
    ];
    for (node, c) in weighted {
        if c != 0.0 {
            let term = graph.scale(node, c);
            total = graph.add(total, term)?;
        }
    }

    let clip_fraction = graph
        .value(taken)
        .data()
        .iter()
        .zip(&batch.old_log_probs)
        .filter(|(lp, old)| ((*lp - *old).exp() - 1.0).abs() > coef.clip_ratio)
        .count() as f64
        / n as f64;

    let item = |id: NodeId| graph.value(id).item();
    let parts = LossBreakdown {
        total: item(total)?,
        surrogate: item(surrogate)?,
        value: item(value_loss)?,
        reward: item(reward_loss)?,
        transition: item(transition_loss)?,
        kl: item(kl)?,
        entropy: -item(neg_entropy)?,
        clip_fraction,
    };
    if !parts.total.is_finite() {
        return Err(Error::NonFinite(format!("unified loss: {parts:?}")));
    }
    Ok((total, parts))
}

pub fn loss_and_gradients(
    agent: &Agent,
    params: &ParamSet,
    batch: &Minibatch,
    coef: &LossCoefficients,
) -> Result<(LossBreakdown, Gradients)> {
    let mut g = Graph::new();
    let (loss, parts) = unified_loss(&mut g, agent, params, batch, coef)?;
    let grads = g.backward(loss, params)?;
    Ok((parts, grads))
}
