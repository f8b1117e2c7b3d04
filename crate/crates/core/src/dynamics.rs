//! Learned reward model `r̂(s, a)` and transition model `T̂(s, a)`.
//!
//! Both networks read `[observation ‖ one-hot(action)]`. The transition
//! head is a sigmoid, matching observations scaled into `[0, 1]`. Its bias
//! starts at the logit of `1 / obs_dim`, the mean of a one-hot target.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{forward_mlp, init_mlp, mlp_graph, Activation, Array, Graph, MlpSpec, NodeId, ParamSet};

pub const HIDDEN: usize = 64;
pub const REWARD_PREFIX: &str = "dyn.reward";
pub const TRANSITION_PREFIX: &str = "dyn.transition";

/// `[observation ‖ one-hot(action)]`.
pub fn model_input(observation: &[f64], action: usize, action_count: usize) -> Result<Vec<f64>> {
    if action >= action_count {
        return Err(Error::Index {
            context: "model_input action".into(),
            index: action,
            size: action_count,
        });
    }
    let mut v = Vec::with_capacity(observation.len() + action_count);
    v.extend_from_slice(observation);
    v.extend((0..action_count).map(|a| if a == action { 1.0 } else { 0.0 }));
    Ok(v)
}

/// Network shapes; the weights live in a [`ParamSet`] under
/// [`REWARD_PREFIX`] and [`TRANSITION_PREFIX`].
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    pub observation_dim: usize,
    pub action_count: usize,
    pub reward_net: MlpSpec,
    pub transition_net: MlpSpec,
}

/// Regression data for the model losses. Masks weight each row in `{0, 1}`.
#[derive(Debug, Clone)]
pub struct TransitionBatch {
    /// `[batch, obs_dim + action_count]`
    pub inputs: Array,
    pub rewards: Vec<f64>,
    /// `[batch, obs_dim]`
    pub next_observations: Array,
    pub reward_mask: Vec<f64>,
    pub transition_mask: Vec<f64>,
}

impl TransitionBatch {
    /// Unmasked batch from `(s, a, r, s')` tuples.
    pub fn from_tuples(
        tuples: &[(Vec<f64>, usize, f64, Vec<f64>)],
        action_count: usize,
    ) -> Result<Self> {
        if tuples.is_empty() {
            return Err(Error::Contract("model losses need a non-empty batch".into()));
        }
        let inputs = tuples
            .iter()
            .map(|(s, a, _, _)| model_input(s, *a, action_count))
            .collect::<Result<Vec<_>>>()?;
        let next: Vec<Vec<f64>> = tuples.iter().map(|t| t.3.clone()).collect();
        let n = tuples.len();
        Ok(Self {
            inputs: Array::from_rows(&inputs)?,
            rewards: tuples.iter().map(|t| t.2).collect(),
            next_observations: Array::from_rows(&next)?,
            reward_mask: vec![1.0; n],
            transition_mask: vec![1.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

impl DynamicsModel {
    pub fn new(observation_dim: usize, action_count: usize) -> Self {
        let input = observation_dim + action_count;
        Self {
            observation_dim,
            action_count,
            reward_net: MlpSpec::new(vec![input, HIDDEN, 1], vec![Activation::Relu, Activation::Identity])
                .expect("static spec"),
            transition_net: MlpSpec::new(
                vec![input, HIDDEN, observation_dim],
                vec![Activation::Relu, Activation::Sigmoid],
            )
            .expect("static spec"),
        }
    }

    pub fn init_params(&self, params: &mut ParamSet, rng: &mut impl Rng) -> Result<()> {
        let gains = [2f64.sqrt(), 1.0];
        init_mlp(params, REWARD_PREFIX, &self.reward_net, &gains, rng)?;
        init_mlp(params, TRANSITION_PREFIX, &self.transition_net, &gains, rng)?;
        if self.observation_dim > 1 {
            let prior = -((self.observation_dim - 1) as f64).ln();
            let bias = params
                .get_mut(&format!("{TRANSITION_PREFIX}.1.b"))
                .ok_or_else(|| Error::Contract("transition output bias missing".into()))?;
            bias.data_mut().iter_mut().for_each(|b| *b = prior);
        }
        Ok(())
    }

    pub fn input(&self, observation: &[f64], action: usize) -> Result<Vec<f64>> {
        if observation.len() != self.observation_dim {
            return Err(Error::shape("dynamics observation", &[self.observation_dim], &[observation.len()]));
        }
        model_input(observation, action, self.action_count)
    }

    pub fn predict_reward(&self, params: &ParamSet, observation: &[f64], action: usize) -> Result<f64> {
        let x = Array::vector(self.input(observation, action)?);
        let r = forward_mlp(params, REWARD_PREFIX, &x, &self.reward_net)?.item()?;
        if !r.is_finite() {
            return Err(Error::ModelDivergence(format!("reward model produced {r}")));
        }
        Ok(r)
    }

    pub fn predict_transition(&self, params: &ParamSet, observation: &[f64], action: usize) -> Result<Vec<f64>> {
        let x = Array::vector(self.input(observation, action)?);
        let out = forward_mlp(params, TRANSITION_PREFIX, &x, &self.transition_net)?;
        out.check_finite("transition model output")
            .map_err(|e| Error::ModelDivergence(e.to_string()))?;
        Ok(out.into_data())
    }

    /// Batched predictions for `inputs = [batch, obs_dim + action_count]`.
    pub fn predict_batch(&self, params: &ParamSet, inputs: &Array) -> Result<(Vec<f64>, Array)> {
        let r = forward_mlp(params, REWARD_PREFIX, inputs, &self.reward_net)?;
        let t = forward_mlp(params, TRANSITION_PREFIX, inputs, &self.transition_net)?;
        r.check_finite("reward model output")
            .and_then(|_| t.check_finite("transition model output"))
            .map_err(|e| Error::ModelDivergence(e.to_string()))?;
        Ok((r.into_data(), t))
    }

    /// Records `(L_r, L_T)` on `graph`: masked mean squared reward error and
    /// masked mean squared Euclidean next-state error.
    pub fn losses_graph(&self, graph: &mut Graph, params: &ParamSet, batch: &TransitionBatch) -> Result<(NodeId, NodeId)> {
        if batch.is_empty() {
            return Err(Error::Contract("model losses need a non-empty batch".into()));
        }
        let n = batch.len();
        let x = graph.constant(batch.inputs.clone());

        let r_hat = mlp_graph(graph, params, REWARD_PREFIX, x, &self.reward_net)?;
        let r_hat = graph.sum_rows(r_hat)?;
        let r = graph.constant(Array::vector(batch.rewards.clone()));
        let diff = graph.sub(r_hat, r)?;
        let reward_loss = masked_mean_square(graph, diff, &batch.reward_mask, n, 1)?;

        let t_hat = mlp_graph(graph, params, TRANSITION_PREFIX, x, &self.transition_net)?;
        let s_next = graph.constant(batch.next_observations.clone());
        let diff = graph.sub(t_hat, s_next)?;
        let transition_loss = masked_mean_square(graph, diff, &batch.transition_mask, n, self.observation_dim)?;

        Ok((reward_loss, transition_loss))
    }

    pub fn model_losses(&self, params: &ParamSet, batch: &TransitionBatch) -> Result<(f64, f64)> {
        let mut g = Graph::new();
        let (lr, lt) = self.losses_graph(&mut g, params, batch)?;
        Ok((g.value(lr).item()?, g.value(lt).item()?))
    }
}

/// `Σ_rows mask · ‖diff_row‖² / Σ mask`; zero when every row is masked.
fn masked_mean_square(graph: &mut Graph, diff: NodeId, mask: &[f64], rows: usize, width: usize) -> Result<NodeId> {
    if mask.len() != rows {
        return Err(Error::shape("loss mask", &[rows], &[mask.len()]));
    }
    let count: f64 = mask.iter().sum();
    if count == 0.0 {
        return Ok(graph.constant(Array::scalar(0.0)));
    }
    let shape = graph.value(diff).shape().to_vec();
    let expanded: Vec<f64> = mask.iter().flat_map(|&m| std::iter::repeat_n(m, width)).collect();
    let m = graph.constant(Array::new(shape, expanded)?);
    let masked = graph.mul(diff, m)?;
    let sq = graph.square(masked);
    let total = graph.sum(sq);
    Ok(graph.scale(total, 1.0 / count))
}
