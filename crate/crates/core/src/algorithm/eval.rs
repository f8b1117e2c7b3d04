use rand::Rng as _;
use serde::Serialize;

use super::nets::Agent;
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::numkit::dist::{argmax, sample_categorical};
use crate::numkit::Array;
use crate::seeding::{rng_for, streams};

pub trait Policy {
    fn logits(&self, observation: &[f64]) -> Result<Vec<f64>>;
}

impl Policy for Agent {
    fn logits(&self, observation: &[f64]) -> Result<Vec<f64>> {
        let x = Array::from_rows(&[observation.to_vec()])?;
        let (logits, _) = self.policy.forward(&self.params, &x)?;
        Ok(logits.into_data())
    }
}

/// Equal logits over `n` actions.
#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy(pub usize);

impl Policy for UniformPolicy {
    fn logits(&self, _observation: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ActionSelection {
    #[default]
    Greedy,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
}

impl EvalSummary {
    pub fn from_returns(returns: &[f64]) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::Contract("evaluation needs at least one episode".into()));
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let stddev = if returns.len() > 1 {
            (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            episodes: returns.len(),
            mean,
            median: crate::targets::median(returns),
            stddev,
        })
    }
}

/// Undiscounted returns of `episodes` full episodes.
pub fn evaluate(
    policy: &dyn Policy,
    env: &mut dyn Env,
    episodes: usize,
    seed: u64,
    selection: ActionSelection,
) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(Error::Contract("evaluation needs at least one episode".into()));
    }
    let mut rng = rng_for(seed, streams::EVAL);
    let mut obs = env.reset(seed);
    let mut returns = Vec::with_capacity(episodes);
    while returns.len() < episodes {
        let logits = policy.logits(&obs)?;
        if logits.len() != env.spec().action_count {
            return Err(Error::shape("policy logits", &[env.spec().action_count], &[logits.len()]));
        }
        let action = match selection {
            ActionSelection::Greedy => argmax(&logits),
            ActionSelection::Sample => sample_categorical(&logits, rng.random()),
        };
        let step = env.step(action)?;
        obs = step.observation;
        if let Some(ret) = step.episode_return {
            returns.push(ret);
            obs = env.restart();
        }
    }
    EvalSummary::from_returns(&returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ChainMdp;

    struct AlwaysRight;

    impl Policy for AlwaysRight {
        fn logits(&self, _o: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0, 1.0])
        }
    }

    #[test]
    fn zero_episodes_is_an_error() {
        let mut env = ChainMdp::new(5, false);
        assert!(evaluate(&UniformPolicy(2), &mut env, 0, 0, ActionSelection::Sample).is_err());
    }

    #[test]
    fn greedy_right_solves_chain() {
        let mut env = ChainMdp::new(20, false);
        let s = evaluate(&AlwaysRight, &mut env, 5, 0, ActionSelection::Greedy).unwrap();
        assert_eq!((s.mean, s.median, s.stddev), (1.0, 1.0, 0.0));
    }

    #[test]
    fn summary_statistics() {
        let s = EvalSummary::from_returns(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        assert!((s.stddev - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
