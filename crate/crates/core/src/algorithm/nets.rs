use rand::Rng;

use crate::dynamics::DynamicsModel;
use crate::error::{Error, Result};
use crate::numkit::{forward_mlp, init_mlp, mlp_graph, Activation, Array, Graph, MlpSpec, NodeId, ParamSet};

pub const HIDDEN: usize = 64;
pub const TRUNK_PREFIX: &str = "pv.trunk";
pub const POLICY_PREFIX: &str = "pv.pi";
pub const VALUE_PREFIX: &str = "pv.v";

/// Actor-critic with a shared tanh trunk and two linear heads.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNet {
    pub observation_dim: usize,
    pub action_count: usize,
    pub trunk: MlpSpec,
    pub policy_head: MlpSpec,
    pub value_head: MlpSpec,
}

impl PolicyValueNet {
    pub fn new(observation_dim: usize, action_count: usize) -> Self {
        Self {
            observation_dim,
            action_count,
            trunk: MlpSpec::new(vec![observation_dim, HIDDEN, HIDDEN], vec![Activation::Tanh; 2])
                .expect("static spec"),
            policy_head: MlpSpec::new(vec![HIDDEN, action_count], vec![Activation::Identity])
                .expect("static spec"),
            value_head: MlpSpec::new(vec![HIDDEN, 1], vec![Activation::Identity]).expect("static spec"),
        }
    }

    /// Orthogonal init: √2 on the trunk, 0.01 on the policy head, 1 on the value head.
    pub fn init_params(&self, params: &mut ParamSet, rng: &mut impl Rng) -> Result<()> {
        let g = 2f64.sqrt();
        init_mlp(params, TRUNK_PREFIX, &self.trunk, &[g, g], rng)?;
        init_mlp(params, POLICY_PREFIX, &self.policy_head, &[0.01], rng)?;
        init_mlp(params, VALUE_PREFIX, &self.value_head, &[1.0], rng)
    }

    /// Records `(logits [B, A], values [B])` for `observations [B, obs_dim]`.
    pub fn forward_graph(&self, graph: &mut Graph, params: &ParamSet, observations: NodeId) -> Result<(NodeId, NodeId)> {
        let h = mlp_graph(graph, params, TRUNK_PREFIX, observations, &self.trunk)?;
        let logits = mlp_graph(graph, params, POLICY_PREFIX, h, &self.policy_head)?;
        let v = mlp_graph(graph, params, VALUE_PREFIX, h, &self.value_head)?;
        let v = graph.sum_rows(v)?;
        Ok((logits, v))
    }

    pub fn forward(&self, params: &ParamSet, observations: &Array) -> Result<(Array, Vec<f64>)> {
        let mut g = Graph::new();
        let x = g.constant(observations.clone());
        let (logits, values) = self.forward_graph(&mut g, params, x)?;
        let logits = g.value(logits).clone();
        logits.check_finite("policy logits")?;
        let values = g.value(values).clone();
        values.check_finite("value estimates")?;
        Ok((logits, values.into_data()))
    }

    pub fn values(&self, params: &ParamSet, observations: &Array) -> Result<Vec<f64>> {
        let h = forward_mlp(params, TRUNK_PREFIX, observations, &self.trunk)?;
        Ok(forward_mlp(params, VALUE_PREFIX, &h, &self.value_head)?.into_data())
    }
}

/// Everything a run learns: actor-critic plus dynamics model, one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub policy: PolicyValueNet,
    pub dynamics: DynamicsModel,
    pub params: ParamSet,
}

impl Agent {
    pub fn new(observation_dim: usize, action_count: usize, rng: &mut impl Rng) -> Result<Self> {
        let policy = PolicyValueNet::new(observation_dim, action_count);
        let dynamics = DynamicsModel::new(observation_dim, action_count);
        let mut params = ParamSet::new();
        policy.init_params(&mut params, rng)?;
        dynamics.init_params(&mut params, rng)?;
        Ok(Self { policy, dynamics, params })
    }

    /// Rebuilds the architecture around loaded parameters, checking every shape.
    pub fn from_params(params: ParamSet) -> Result<Self> {
        let w = params.get(&format!("{TRUNK_PREFIX}.0.w"))?;
        let (observation_dim, _) = w.dims2("trunk weight")?;
        let (_, action_count) = params.get(&format!("{POLICY_PREFIX}.0.w"))?.dims2("policy weight")?;
        let mut reference = ParamSet::new();
        let policy = PolicyValueNet::new(observation_dim, action_count);
        let dynamics = DynamicsModel::new(observation_dim, action_count);
        let mut rng = crate::seeding::rng_for(0, 0);
        policy.init_params(&mut reference, &mut rng)?;
        dynamics.init_params(&mut reference, &mut rng)?;
        if reference.len() != params.len() {
            return Err(Error::Contract(format!(
                "expected {} parameter arrays, found {}",
                reference.len(),
                params.len()
            )));
        }
        for ((name, expected), (got_name, got)) in reference.iter().zip(params.iter()) {
            if name != got_name {
                return Err(Error::Contract(format!("expected parameter `{name}`, found `{got_name}`")));
            }
            if expected.shape() != got.shape() {
                return Err(Error::shape(format!("parameter `{name}`"), expected.shape(), got.shape()));
            }
        }
        Ok(Self { policy, dynamics, params })
    }

    pub fn observation_dim(&self) -> usize {
        self.policy.observation_dim
    }

    pub fn action_count(&self) -> usize {
        self.policy.action_count
    }
}
