//! Central finite-difference checks against the autodiff gradients.

#![allow(dead_code)]

use pome::algorithm::{loss_and_gradients, Agent, LossCoefficients, Minibatch};
use pome::dynamics::TransitionBatch;
use pome::numkit::{Array, ParamSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-7;

/// A random batch for an agent on `obs_dim` inputs and `actions` actions.
pub fn random_batch(agent: &Agent, size: usize, seed: u64) -> Minibatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs_dim = agent.observation_dim();
    let n_act = agent.action_count();
    let obs: Vec<Vec<f64>> = (0..size).map(|_| (0..obs_dim).map(|_| rng.random::<f64>()).collect()).collect();
    let observations = Array::from_rows(&obs).unwrap();
    let (logits, _) = agent.policy.forward(&agent.params, &observations).unwrap();
    let actions: Vec<usize> = (0..size).map(|_| rng.random_range(0..n_act)).collect();
    // Old log-probs offset from the current ones so ratios straddle the clip range.
    let old_log_probs: Vec<f64> = actions
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let row = logits.row(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|l| (l - m).exp()).sum();
            row[a] - m - z.ln() + rng.random_range(-0.5..0.5)
        })
        .collect();
    let old_logits: Vec<Vec<f64>> = (0..size)
        .map(|i| logits.row(i).iter().map(|l| l + rng.random_range(-0.3..0.3)).collect())
        .collect();
    let inputs: Vec<Vec<f64>> = obs
        .iter()
        .zip(&actions)
        .map(|(o, &a)| agent.dynamics.input(o, a).unwrap())
        .collect();
    let next: Vec<Vec<f64>> = (0..size).map(|_| (0..obs_dim).map(|_| rng.random::<f64>()).collect()).collect();
    let mut transition_mask = vec![1.0; size];
    transition_mask[0] = 0.0;
    Minibatch {
        observations,
        actions,
        old_log_probs,
        old_logits: Array::from_rows(&old_logits).unwrap(),
        advantages: (0..size).map(|_| rng.random_range(-2.0..2.0)).collect(),
        value_targets: (0..size).map(|_| rng.random_range(-1.0..1.0)).collect(),
        model: TransitionBatch {
            inputs: Array::from_rows(&inputs).unwrap(),
            rewards: (0..size).map(|_| rng.random_range(-1.0..1.0)).collect(),
            next_observations: Array::from_rows(&next).unwrap(),
            reward_mask: vec![1.0; size],
            transition_mask,
        },
    }
}

/// Coefficients isolating one loss component. Zero advantages make the
/// surrogate identically zero, so only the selected term carries gradient.
pub fn isolate(component: &str, batch: &mut Minibatch) -> LossCoefficients {
    let zero = LossCoefficients {
        clip_ratio: 0.2,
        beta: 0.0,
        entropy_coef: 0.0,
        cv: 0.0,
        ct: 0.0,
        cr: 0.0,
    };
    if component != "surrogate" && component != "unified" {
        batch.advantages.iter_mut().for_each(|a| *a = 0.0);
    }
    match component {
        "surrogate" => zero,
        "value" => LossCoefficients { cv: 1.0, ..zero },
        "reward" => LossCoefficients { cr: 1.0, ..zero },
        "transition" => LossCoefficients { ct: 1.0, ..zero },
        "unified" => LossCoefficients {
            beta: 0.3,
            entropy_coef: 0.01,
            cv: 1.0,
            ct: 2.0,
            cr: 2.0,
            ..zero
        },
        other => panic!("unknown component {other}"),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradReport {
    pub checked: usize,
    pub failures: usize,
    /// Largest relative error over entries whose magnitude exceeds the floor.
    pub max_rel: f64,
    pub max_abs: f64,
}

/// Compares every parameter entry (or `per_tensor` random entries of larger tensors).
pub fn check(agent: &Agent, batch: &Minibatch, coef: &LossCoefficients, per_tensor: usize, seed: u64) -> GradReport {
    let loss = |p: &ParamSet| loss_and_gradients(agent, p, batch, coef).unwrap().0.total;
    let (_, grads) = loss_and_gradients(agent, &agent.params, batch, coef).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = agent.params.clone();
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    let mut report = GradReport::default();
    for (slot, name) in names.iter().enumerate() {
        let len = params.get(name).unwrap().len();
        let picks: Vec<usize> = if len <= per_tensor {
            (0..len).collect()
        } else {
            (0..per_tensor).map(|_| rng.random_range(0..len)).collect()
        };
        for i in picks {
            let orig = params.get(name).unwrap().data()[i];
            params.get_mut(name).unwrap().data_mut()[i] = orig + STEP;
            let up = loss(&params);
            params.get_mut(name).unwrap().data_mut()[i] = orig - STEP;
            let down = loss(&params);
            params.get_mut(name).unwrap().data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let analytic = grads.get(slot).data()[i];
            let diff = (numeric - analytic).abs();
            let scale = numeric.abs().max(analytic.abs());
            report.checked += 1;
            report.max_abs = report.max_abs.max(diff);
            if scale > 1e-3 {
                report.max_rel = report.max_rel.max(diff / scale);
            }
            if diff > REL_TOL * scale && diff > ABS_FLOOR {
                report.failures += 1;
            }
        }
    }
    report
}

pub const COMPONENTS: [&str; 5] = ["surrogate", "value", "reward", "transition", "unified"];

pub fn agent(seed: u64) -> Agent {
    Agent::new(4, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}
