use rand::seq::SliceRandom;
use rand::Rng as _;

use super::config::{schedule, Mode, TrainConfig};
use super::loss::{loss_and_gradients, LossBreakdown, LossCoefficients, Minibatch};
use super::nets::Agent;
use crate::dynamics::TransitionBatch;
use crate::envs::VecEnv;
use crate::error::{Error, Result};
use crate::numkit::dist::sample_categorical;
use crate::numkit::{adam_step, log_softmax, AdamState, Array};
use crate::seeding::{rng_for, streams, Rng};
use crate::targets::{compute_tables, DeltaSource, ModelPredictions, Segment, TargetParams, TargetTable};

/// Window for the "final episodes" return statistics.
pub const RETURN_WINDOW: usize = 100;

/// Summary of one collect → targets → optimize cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub total_steps: usize,
    /// Over the last [`RETURN_WINDOW`] completed episodes (0 before the first one ends).
    pub mean_return: f64,
    pub median_return: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub reward_loss: f64,
    pub transition_loss: f64,
    pub mean_eps: f64,
    pub eps_bar_mean: f64,
    pub mean_abs_bonus: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub alpha: f64,
    pub lr: f64,
}

/// Rollout data and targets from the most recent iteration.
#[derive(Debug, Clone, Default)]
pub struct RolloutRecord {
    pub segments: Vec<Segment>,
    pub tables: Vec<TargetTable>,
}

pub struct Trainer {
    config: TrainConfig,
    agent: Agent,
    adam: AdamState,
    venv: VecEnv,
    observations: Vec<Vec<f64>>,
    policy_rngs: Vec<Rng>,
    shuffle_rng: Rng,
    steps_done: usize,
    iteration: usize,
    episode_returns: Vec<f64>,
    last_rollout: RolloutRecord,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut venv = VecEnv::from_id(config.env, config.env_options(), config.workers)?;
        let spec = venv.spec().clone();
        let agent = Agent::new(spec.observation_dim, spec.action_count, &mut rng_for(config.seed, streams::INIT))?;
        let observations = venv.reset(config.seed);
        Ok(Self {
            adam: AdamState::new(&agent.params),
            policy_rngs: (0..config.workers)
                .map(|w| rng_for(config.seed, streams::POLICY + w as u64))
                .collect(),
            shuffle_rng: rng_for(config.seed, streams::SHUFFLE),
            agent,
            venv,
            observations,
            steps_done: 0,
            iteration: 0,
            episode_returns: Vec::new(),
            last_rollout: RolloutRecord::default(),
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.config.iterations()
    }

    pub fn episode_returns(&self) -> &[f64] {
        &self.episode_returns
    }

    pub fn last_rollout(&self) -> &RolloutRecord {
        &self.last_rollout
    }

    /// Annealing fraction `f = 1 − steps_done / total_steps`.
    pub fn progress(&self) -> f64 {
        (1.0 - self.steps_done as f64 / self.config.total_steps as f64).clamp(0.0, 1.0)
    }

    pub fn current_alpha(&self) -> f64 {
        schedule(self.config.alpha0, self.progress(), self.config.alpha_schedule)
    }

    pub fn current_lr(&self) -> f64 {
        schedule(self.config.lr0, self.progress(), self.config.lr_schedule)
    }

    /// Mean and median of the last [`RETURN_WINDOW`] completed episodes.
    pub fn recent_returns(&self) -> (f64, f64) {
        let start = self.episode_returns.len().saturating_sub(RETURN_WINDOW);
        let recent = &self.episode_returns[start..];
        if recent.is_empty() {
            return (0.0, 0.0);
        }
        let mean = recent.iter().sum::<f64>() / recent.len() as f64;
        (mean, crate::targets::median(recent))
    }

    pub fn train_iteration(&mut self) -> Result<IterationReport> {
        let iteration = self.iteration;
        self.run_iteration().map_err(|e| Error::Iteration {
            iteration,
            source: Box::new(e),
        })
    }

    fn run_iteration(&mut self) -> Result<IterationReport> {
        let alpha = self.current_alpha();
        let lr = self.current_lr();
        let clip_ratio = schedule(self.config.clip_ratio, self.progress(), self.config.clip_schedule);

        let segments = self.collect()?;
        let predictions = model_predictions(&self.agent, &segments)?;
        let source = match self.config.mode {
            Mode::Ppo => DeltaSource::ModelFree,
            Mode::Pome => DeltaSource::Pome {
                alpha,
                clip: self.config.bonus_clip,
            },
            Mode::PpoModelBased => DeltaSource::ModelBased,
        };
        let params = TargetParams {
            gamma: self.config.gamma,
            lambda: self.config.lambda,
            median_scope: self.config.median_scope,
            source,
        };
        let tables = compute_tables(&segments, &predictions, &params)?;

        let batch = flatten(&self.agent, &segments, &tables, self.config.adv_norm)?;
        let coef = LossCoefficients {
            clip_ratio,
            beta: self.config.beta,
            entropy_coef: self.config.entropy_coef,
            cv: self.config.cv,
            ct: self.config.ct,
            cr: self.config.cr,
        };

        let n = batch.len();
        let mb_size = n / self.config.minibatches;
        let mut indices: Vec<usize> = (0..n).collect();
        let mut sum = LossBreakdown::default();
        let mut updates = 0usize;
        for _ in 0..self.config.epochs {
            if self.config.minibatches > 1 {
                indices.shuffle(&mut self.shuffle_rng);
            }
            for chunk in indices.chunks(mb_size) {
                let mb = if self.config.minibatches == 1 {
                    batch.clone()
                } else {
                    select(&batch, chunk)?
                };
                let (parts, grads) = loss_and_gradients(&self.agent, &self.agent.params, &mb, &coef)?;
                adam_step(&mut self.agent.params, &grads, &mut self.adam, lr)?;
                sum.surrogate += parts.surrogate;
                sum.value += parts.value;
                sum.reward += parts.reward;
                sum.transition += parts.transition;
                sum.kl += parts.kl;
                sum.clip_fraction += parts.clip_fraction;
                updates += 1;
            }
        }
        let u = updates as f64;

        self.steps_done += n;
        self.iteration += 1;
        let (mean_return, median_return) = self.recent_returns();
        let count = n as f64;
        let report = IterationReport {
            iteration: self.iteration,
            total_steps: self.steps_done,
            mean_return,
            median_return,
            surrogate: sum.surrogate / u,
            value_loss: sum.value / u,
            reward_loss: sum.reward / u,
            transition_loss: sum.transition / u,
            mean_eps: tables.iter().flat_map(|t| &t.eps).sum::<f64>() / count,
            eps_bar_mean: tables.iter().map(|t| t.eps_bar).sum::<f64>() / tables.len() as f64,
            mean_abs_bonus: tables.iter().flat_map(|t| &t.bonus).map(|b| b.abs()).sum::<f64>() / count,
            approx_kl: sum.kl / u,
            clip_fraction: sum.clip_fraction / u,
            alpha,
            lr,
        };
        self.last_rollout = RolloutRecord { segments, tables };
        Ok(report)
    }

    fn collect(&mut self) -> Result<Vec<Segment>> {
        collect_segments(
            &self.agent,
            &mut self.venv,
            &mut self.observations,
            &mut self.policy_rngs,
            self.config.k,
            &mut self.episode_returns,
        )
    }
}

/// Runs `k` synchronous steps of the sampling policy on every worker.
pub fn collect_segments(
    agent: &Agent,
    venv: &mut VecEnv,
    observations: &mut Vec<Vec<f64>>,
    rngs: &mut [Rng],
    k: usize,
    episode_returns: &mut Vec<f64>,
) -> Result<Vec<Segment>> {
    let workers = venv.workers();
    let mut segments: Vec<Segment> = vec![Segment::default(); workers];
    for _ in 0..k {
        let (logits, values) = agent.policy.forward(&agent.params, &Array::from_rows(observations)?)?;
        let mut actions = Vec::with_capacity(workers);
        for (w, seg) in segments.iter_mut().enumerate() {
            let row = logits.row(w);
            let u: f64 = rngs[w].random();
            let a = sample_categorical(row, u);
            actions.push(a);
            seg.observations.push(observations[w].clone());
            seg.actions.push(a);
            seg.values.push(values[w]);
            seg.log_probs.push(log_softmax(row)[a]);
            seg.logits.push(row.to_vec());
        }
        let results = venv.step(&actions)?;
        for (w, (seg, res)) in segments.iter_mut().zip(results).enumerate() {
            seg.rewards.push(res.reward);
            seg.dones.push(res.done);
            seg.next_observations.push(res.observation.clone());
            if let Some(ret) = res.episode_return {
                episode_returns.push(ret);
            }
            observations[w] = res.observation;
        }
    }
    let bootstrap = agent.policy.values(&agent.params, &Array::from_rows(observations)?)?;
    for (seg, v) in segments.iter_mut().zip(bootstrap) {
        seg.bootstrap_value = v;
    }
    Ok(segments)
}

/// `r̂(s_t, a_t)` and `V_old(T̂(s_t, a_t))` for every step of every segment.
pub fn model_predictions(agent: &Agent, segments: &[Segment]) -> Result<Vec<ModelPredictions>> {
    let mut inputs = Vec::new();
    for seg in segments {
        for (obs, &a) in seg.observations.iter().zip(&seg.actions) {
            inputs.push(agent.dynamics.input(obs, a)?);
        }
    }
    let (rewards, next) = agent.dynamics.predict_batch(&agent.params, &Array::from_rows(&inputs)?)?;
    let next_values = agent.policy.values(&agent.params, &next)?;
    let mut out = Vec::with_capacity(segments.len());
    let mut offset = 0;
    for seg in segments {
        let k = seg.len();
        out.push(ModelPredictions {
            rewards: rewards[offset..offset + k].to_vec(),
            next_values: next_values[offset..offset + k].to_vec(),
        });
        offset += k;
    }
    Ok(out)
}

/// Worker-major flattening into one optimizer batch.
fn flatten(agent: &Agent, segments: &[Segment], tables: &[TargetTable], normalize: bool) -> Result<Minibatch> {
    let mut obs = Vec::new();
    let mut logits = Vec::new();
    let mut inputs = Vec::new();
    let mut next = Vec::new();
    let mut actions = Vec::new();
    let mut old_log_probs = Vec::new();
    let mut advantages = Vec::new();
    let mut value_targets = Vec::new();
    let mut rewards = Vec::new();
    let mut transition_mask = Vec::new();
    for (seg, tab) in segments.iter().zip(tables) {
        for t in 0..seg.len() {
            obs.push(seg.observations[t].clone());
            logits.push(seg.logits[t].clone());
            inputs.push(agent.dynamics.input(&seg.observations[t], seg.actions[t])?);
            next.push(seg.next_observations[t].clone());
            actions.push(seg.actions[t]);
            old_log_probs.push(seg.log_probs[t]);
            rewards.push(seg.rewards[t]);
            // s' after a terminal step is the next episode's start state.
            transition_mask.push(if seg.dones[t] { 0.0 } else { 1.0 });
        }
        advantages.extend_from_slice(&tab.advantages);
        value_targets.extend_from_slice(&tab.value_targets);
    }
    if normalize {
        normalize_in_place(&mut advantages);
    }
    let n = actions.len();
    Ok(Minibatch {
        observations: Array::from_rows(&obs)?,
        actions,
        old_log_probs,
        old_logits: Array::from_rows(&logits)?,
        advantages,
        value_targets,
        model: TransitionBatch {
            inputs: Array::from_rows(&inputs)?,
            rewards,
            next_observations: Array::from_rows(&next)?,
            reward_mask: vec![1.0; n],
            transition_mask,
        },
    })
}

/// Zero mean, unit variance (population), with a 1e-8 floor on the scale.
pub fn normalize_in_place(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for v in values.iter_mut() {
        *v = (*v - mean) / std;
    }
}

fn select(batch: &Minibatch, idx: &[usize]) -> Result<Minibatch> {
    let rows = |a: &Array| -> Result<Array> {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| a.row(i).to_vec()).collect();
        Array::from_rows(&rows)
    };
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    Ok(Minibatch {
        observations: rows(&batch.observations)?,
        actions: idx.iter().map(|&i| batch.actions[i]).collect(),
        old_log_probs: pick(&batch.old_log_probs),
        old_logits: rows(&batch.old_logits)?,
        advantages: pick(&batch.advantages),
        value_targets: pick(&batch.value_targets),
        model: TransitionBatch {
            inputs: rows(&batch.model.inputs)?,
            rewards: pick(&batch.model.rewards),
            next_observations: rows(&batch.model.next_observations)?,
            reward_mask: pick(&batch.model.reward_mask),
            transition_mask: pick(&batch.model.transition_mask),
        },
    })
}
