//! Model-free and model-based TD targets, the discrepancy bonus and the
//! k-step advantages built from it.
//!
//! Everything here is a pure function of rollout-time data. Per worker and
//! per timestep `t`:
//!
//! ```text
//! Q_f   = r + γ(1−d)·V(s')             model-free target
//! Q_b   = r̂(s,a) + γ(1−d)·V(T̂(s,a))    model-based target
//! ε     = |Q_b − Q_f|
//! ε̄     = median(ε)                     per worker (or over the batch)
//! δ     = Q_f − V(s)
//! δ⁺    = δ + α·clip(ε − ε̄, −|δ|, |δ|)
//! Â_t   = δ⁺_t + γλ(1−d_t)·Â_{t+1}
//! V_tgt = Â + V(s)
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One worker's k-step slice of experience.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segment {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// `V_old(s_t)`
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Rollout-time logits, kept for the KL term.
    pub logits: Vec<Vec<f64>>,
    /// Observed `s_{t+1}`. Meaningless where `dones[t]` is set.
    pub next_observations: Vec<Vec<f64>>,
    /// `V_old(s_k)`
    pub bootstrap_value: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.rewards.len();
        let lens = [
            self.observations.len(),
            self.actions.len(),
            self.dones.len(),
            self.values.len(),
            self.log_probs.len(),
            self.next_observations.len(),
        ];
        if let Some(bad) = lens.iter().find(|&&l| l != k) {
            return Err(Error::shape("segment arrays", &[k], &[*bad]));
        }
        if k == 0 {
            return Err(Error::Contract("empty segment".into()));
        }
        Ok(())
    }

    /// `V_old(s_{t+1})`, with the bootstrap value at the last step.
    pub fn next_values(&self) -> Vec<f64> {
        let mut next: Vec<f64> = self.values.iter().skip(1).copied().collect();
        next.push(self.bootstrap_value);
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MedianScope {
    #[default]
    Worker,
    Batch,
}

/// Which per-step TD error feeds the advantage recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSource {
    /// Plain `δ`.
    ModelFree,
    /// `δ + α·bonus`; `clip = false` skips the `±|δ|` clipping.
    Pome { alpha: f64, clip: bool },
    /// `Q_b − V(s)` in place of `δ`.
    ModelBased,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetParams {
    pub gamma: f64,
    pub lambda: f64,
    pub median_scope: MedianScope,
    pub source: DeltaSource,
}

fn mask(done: bool) -> f64 {
    if done {
        0.0
    } else {
        1.0
    }
}

pub fn model_free_target(rewards: &[f64], dones: &[bool], next_values: &[f64], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(dones)
        .zip(next_values)
        .map(|((r, &d), v)| r + gamma * mask(d) * v)
        .collect()
}

/// Same arithmetic as [`model_free_target`], fed with `r̂` and `V(T̂)`.
pub fn model_based_target(
    predicted_rewards: &[f64],
    dones: &[bool],
    predicted_next_values: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    let out = model_free_target(predicted_rewards, dones, predicted_next_values, gamma);
    if let Some(v) = out.iter().find(|v| !v.is_finite()) {
        return Err(Error::ModelDivergence(format!("model-based target {v}")));
    }
    Ok(out)
}

pub fn td_errors(targets: &[f64], values: &[f64]) -> Vec<f64> {
    targets.iter().zip(values).map(|(q, v)| q - v).collect()
}

pub fn discrepancy(q_free: &[f64], q_model: &[f64]) -> Vec<f64> {
    q_free.iter().zip(q_model).map(|(f, b)| (b - f).abs()).collect()
}

/// Median; the mean of the two central order statistics for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Centered discrepancy clipped into `[−|δ|, |δ|]`.
pub fn clipped_bonus(delta: f64, eps: f64, eps_bar: f64) -> f64 {
    let bound = delta.abs();
    (eps - eps_bar).clamp(-bound, bound)
}

/// `δ + α·clip(ε − ε̄, −|δ|, |δ|)`. Returns `δ` untouched when `α = 0`.
pub fn pome_delta(delta: f64, eps: f64, eps_bar: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return delta;
    }
    delta + alpha * clipped_bonus(delta, eps, eps_bar)
}

/// `δ + α(ε − ε̄)` without clipping, kept for ablations.
pub fn pome_delta_unclipped(delta: f64, eps: f64, eps_bar: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return delta;
    }
    delta + alpha * (eps - eps_bar)
}

/// Backward recursion `Â_t = δ_t + γλ(1−d_t)·Â_{t+1}` with `Â_{k−1} = δ_{k−1}`.
pub fn pome_advantages(deltas: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let mut adv = vec![0.0; deltas.len()];
    let mut next = 0.0;
    for t in (0..deltas.len()).rev() {
        next = deltas[t] + gamma * lambda * mask(dones[t]) * next;
        adv[t] = next;
    }
    adv
}

pub fn value_targets(advantages: &[f64], values: &[f64]) -> Vec<f64> {
    advantages.iter().zip(values).map(|(a, v)| a + v).collect()
}

/// Standard model-free GAE: advantages and value targets for one segment.
pub fn gae(segment: &Segment, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = segment.len();
    let next_values = segment.next_values();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let m = mask(segment.dones[t]);
        let target = segment.rewards[t] + gamma * m * next_values[t];
        let delta = target - segment.values[t];
        running = delta + gamma * lambda * m * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(&segment.values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Model predictions a segment needs for its model-based targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPredictions {
    /// `r̂(s_t, a_t)`
    pub rewards: Vec<f64>,
    /// `V_old(T̂(s_t, a_t))`
    pub next_values: Vec<f64>,
}

/// Per-timestep targets for one worker.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetTable {
    pub q_free: Vec<f64>,
    pub q_model: Vec<f64>,
    pub eps: Vec<f64>,
    pub eps_bar: f64,
    pub delta: Vec<f64>,
    /// δ fed to the advantage recursion (δ⁺ for POME, δ̃ for the model-based arm).
    pub delta_pome: Vec<f64>,
    /// `α·clip(ε − ε̄, −|δ|, |δ|)` (zero outside POME).
    pub bonus: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

/// Builds one table per worker.
pub fn compute_tables(
    segments: &[Segment],
    predictions: &[ModelPredictions],
    params: &TargetParams,
) -> Result<Vec<TargetTable>> {
    if segments.len() != predictions.len() {
        return Err(Error::shape("model predictions", &[segments.len()], &[predictions.len()]));
    }
    let mut tables = Vec::with_capacity(segments.len());
    for (seg, pred) in segments.iter().zip(predictions) {
        seg.validate()?;
        if pred.rewards.len() != seg.len() || pred.next_values.len() != seg.len() {
            return Err(Error::shape("model predictions", &[seg.len()], &[pred.rewards.len()]));
        }
        let q_free = model_free_target(&seg.rewards, &seg.dones, &seg.next_values(), params.gamma);
        let q_model = model_based_target(&pred.rewards, &seg.dones, &pred.next_values, params.gamma)?;
        let eps = discrepancy(&q_free, &q_model);
        let delta = td_errors(&q_free, &seg.values);
        tables.push(TargetTable {
            eps_bar: median(&eps),
            q_free,
            q_model,
            eps,
            delta,
            ..TargetTable::default()
        });
    }

    if params.median_scope == MedianScope::Batch {
        let all: Vec<f64> = tables.iter().flat_map(|t| t.eps.iter().copied()).collect();
        let shared = median(&all);
        for t in &mut tables {
            t.eps_bar = shared;
        }
    }

    for (table, seg) in tables.iter_mut().zip(segments) {
        let n = seg.len();
        match params.source {
            DeltaSource::ModelFree => {
                table.delta_pome = table.delta.clone();
                table.bonus = vec![0.0; n];
            }
            DeltaSource::Pome { alpha, clip } => {
                let step = if clip { pome_delta } else { pome_delta_unclipped };
                table.delta_pome = (0..n)
                    .map(|t| step(table.delta[t], table.eps[t], table.eps_bar, alpha))
                    .collect();
                table.bonus = table
                    .delta_pome
                    .iter()
                    .zip(&table.delta)
                    .map(|(p, d)| p - d)
                    .collect();
            }
            DeltaSource::ModelBased => {
                table.delta_pome = td_errors(&table.q_model, &seg.values);
                table.bonus = vec![0.0; n];
            }
        }
        table.advantages = pome_advantages(&table.delta_pome, &seg.dones, params.gamma, params.lambda);
        table.value_targets = value_targets(&table.advantages, &seg.values);
    }
    Ok(tables)
}

pub const DUMP_HEADER: &str = "t,worker,reward,value,q_free,q_model,eps,eps_bar,delta,delta_pome,advantage";

/// Writes one CSV row per `(t, worker)`, time-major.
pub fn write_dump(mut out: impl Write, segments: &[Segment], tables: &[TargetTable]) -> Result<()> {
    writeln!(out, "{DUMP_HEADER}")?;
    let k = segments.first().map_or(0, Segment::len);
    for t in 0..k {
        for (w, (seg, tab)) in segments.iter().zip(tables).enumerate() {
            writeln!(
                out,
                "{t},{w},{},{},{},{},{},{},{},{},{}",
                seg.rewards[t],
                seg.values[t],
                tab.q_free[t],
                tab.q_model[t],
                tab.eps[t],
                tab.eps_bar,
                tab.delta[t],
                tab.delta_pome[t],
                tab.advantages[t]
            )?;
        }
    }
    Ok(())
}
