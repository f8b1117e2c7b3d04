//! Discrete-action environments with one-hot observations.

pub mod chain;
pub mod grid;
mod vec_env;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use chain::ChainMdp;
pub use grid::GridWorld;
pub use vec_env::VecEnv;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub observation_dim: usize,
    pub action_count: usize,
    /// Per-dimension `(low, high)`.
    pub observation_bounds: Vec<(f64, f64)>,
}

impl EnvSpec {
    pub fn unit_box(observation_dim: usize, action_count: usize) -> Self {
        Self {
            observation_dim,
            action_count,
            observation_bounds: vec![(0.0, 1.0); observation_dim],
        }
    }

    pub fn contains(&self, observation: &[f64]) -> bool {
        observation.len() == self.observation_dim
            && observation
                .iter()
                .zip(&self.observation_bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Undiscounted return of the episode that just ended.
    pub episode_return: Option<f64>,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Reseeds the environment's random stream and starts a new episode.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Starts a new episode without touching the random stream.
    fn restart(&mut self) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<StepResult>;

    /// Whether `observation` lies where transitions are stochastic.
    fn in_stochastic_region(&self, _observation: &[f64]) -> bool {
        false
    }
}

pub(crate) fn one_hot(dim: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[index] = 1.0;
    v
}

pub(crate) fn check_action(action: usize, count: usize) -> Result<()> {
    if action >= count {
        return Err(Error::Index {
            context: "action".into(),
            index: action,
            size: count,
        });
    }
    Ok(())
}

/// Environment selector, written `chain<N>`, `detgrid<N>` or `noisycorridor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EnvId {
    Chain(usize),
    DetGrid(usize),
    NoisyCorridor,
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("env", format!("unknown environment id `{s}`"));
        if s == "noisycorridor" {
            return Ok(EnvId::NoisyCorridor);
        }
        let parse_size = |rest: &str, min: usize| -> Result<usize> {
            let n: usize = rest.parse().map_err(|_| bad())?;
            if n < min {
                return Err(Error::config("env", format!("`{s}` is too small (minimum {min})")));
            }
            Ok(n)
        };
        if let Some(rest) = s.strip_prefix("chain") {
            Ok(EnvId::Chain(parse_size(rest, 2)?))
        } else if let Some(rest) = s.strip_prefix("detgrid") {
            Ok(EnvId::DetGrid(parse_size(rest, 2)?))
        } else {
            Err(bad())
        }
    }
}

impl TryFrom<String> for EnvId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EnvId> for String {
    fn from(id: EnvId) -> String {
        id.to_string()
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvId::Chain(n) => write!(f, "chain{n}"),
            EnvId::DetGrid(n) => write!(f, "detgrid{n}"),
            EnvId::NoisyCorridor => f.write_str("noisycorridor"),
        }
    }
}

/// Extra knobs that are not part of the id.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvOptions {
    /// Chain only: the left-exit trap pays nothing.
    pub sparse_reward: bool,
}

pub fn make_env(id: EnvId, options: EnvOptions) -> Box<dyn Env> {
    match id {
        EnvId::Chain(n) => Box::new(ChainMdp::new(n, options.sparse_reward)),
        EnvId::DetGrid(n) => Box::new(GridWorld::det_grid(n)),
        EnvId::NoisyCorridor => Box::new(GridWorld::noisy_corridor()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_parse_and_print() {
        for s in ["chain20", "detgrid5", "noisycorridor", "chain7"] {
            assert_eq!(s.parse::<EnvId>().unwrap().to_string(), s);
        }
        assert!("gridworld".parse::<EnvId>().is_err());
        assert!("chain1".parse::<EnvId>().is_err());
    }
}
