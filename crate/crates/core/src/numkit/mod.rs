//! Small dense autodiff toolkit: arrays, a recording graph, MLPs,
//! categorical distributions and Adam.

mod adam;
mod array;
pub mod dist;
mod graph;
mod mlp;
mod params;

pub use adam::{adam_step, AdamState};
pub use array::Array;
pub use dist::{categorical_entropy, categorical_kl, categorical_logprob};
pub use graph::{log_softmax, Activation, Gradients, Graph, NodeId};
pub use mlp::{forward_mlp, init_mlp, mlp_graph, orthogonal, MlpSpec};
pub use params::ParamSet;
