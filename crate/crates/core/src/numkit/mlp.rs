use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Activation, Array, Graph, NodeId, ParamSet};
use crate::error::{Error, Result};

/// Layer widths plus one activation per layer.
///
/// `sizes = [in, h1, ..., out]`, `activations.len() == sizes.len() - 1`.
/// Layer `i` owns parameters `{prefix}.{i}.w` (`[sizes[i], sizes[i+1]]`)
/// and `{prefix}.{i}.b` (`[sizes[i+1]]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::Contract(format!(
                "mlp needs n+1 sizes for n activations, got {} sizes and {} activations",
                sizes.len(),
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Contract("mlp layer width must be positive".into()));
        }
        Ok(Self { sizes, activations })
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().expect("validated non-empty")
    }

    pub fn layers(&self) -> usize {
        self.activations.len()
    }
}

fn weight_name(prefix: &str, layer: usize) -> String {
    format!("{prefix}.{layer}.w")
}

fn bias_name(prefix: &str, layer: usize) -> String {
    format!("{prefix}.{layer}.b")
}

/// Orthogonal `[rows, cols]` matrix scaled by `gain`.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Array {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let gauss = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let m = if rows >= cols { q } else { q.transpose() };
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            data.push(gain * m[(i, j)]);
        }
    }
    Array::new(vec![rows, cols], data).expect("orthogonal shape")
}

/// Inserts orthogonally initialised weights and zero biases for every layer.
/// `gains[i]` scales layer `i`.
pub fn init_mlp(
    params: &mut ParamSet,
    prefix: &str,
    spec: &MlpSpec,
    gains: &[f64],
    rng: &mut impl Rng,
) -> Result<()> {
    if gains.len() != spec.layers() {
        return Err(Error::shape("init_mlp gains", &[spec.layers()], &[gains.len()]));
    }
    for (i, gain) in gains.iter().enumerate() {
        let (fan_in, fan_out) = (spec.sizes[i], spec.sizes[i + 1]);
        params.insert(weight_name(prefix, i), orthogonal(fan_in, fan_out, *gain, rng))?;
        params.insert(bias_name(prefix, i), Array::zeros(&[fan_out]))?;
    }
    Ok(())
}

/// Records the network on `graph`; `input` must be `[batch, sizes[0]]`.
pub fn mlp_graph(
    graph: &mut Graph,
    params: &ParamSet,
    prefix: &str,
    input: NodeId,
    spec: &MlpSpec,
) -> Result<NodeId> {
    let (_, width) = graph.value(input).dims2("mlp input")?;
    if width != spec.input_width() {
        return Err(Error::shape(
            format!("mlp `{prefix}` input"),
            &[spec.input_width()],
            &[width],
        ));
    }
    let mut h = input;
    for (i, act) in spec.activations.iter().enumerate() {
        let w = graph.param(params, &weight_name(prefix, i))?;
        let b = graph.param(params, &bias_name(prefix, i))?;
        let (rows, cols) = graph.value(w).dims2("mlp weight")?;
        if rows != spec.sizes[i] || cols != spec.sizes[i + 1] {
            return Err(Error::shape(
                format!("mlp `{prefix}` layer {i} weight"),
                &[spec.sizes[i], spec.sizes[i + 1]],
                &[rows, cols],
            ));
        }
        let z = graph.matmul(h, w)?;
        let z = graph.add_bias(z, b)?;
        h = if *act == Activation::Identity {
            z
        } else {
            graph.activate(z, *act)
        };
    }
    Ok(h)
}

/// Forward pass without keeping a graph around. Accepts a single vector
/// (`[in]`) or a batch (`[batch, in]`) and returns the matching rank.
pub fn forward_mlp(params: &ParamSet, prefix: &str, input: &Array, spec: &MlpSpec) -> Result<Array> {
    let batched = input.ndim() == 2;
    let x = if batched {
        input.clone()
    } else {
        input.clone().reshape(vec![1, input.len()])?
    };
    let mut graph = Graph::new();
    let x = graph.constant(x);
    let out = mlp_graph(&mut graph, params, prefix, x, spec)?;
    let value = graph.value(out).clone();
    if batched {
        Ok(value)
    } else {
        value.reshape(vec![spec.output_width()])
    }
}
