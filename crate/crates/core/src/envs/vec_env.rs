use super::{make_env, Env, EnvId, EnvOptions, EnvSpec, StepResult};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, streams};

/// Synchronous batch of independent environments with auto-reset.
///
/// Worker `i` is seeded from `(base_seed, i)` alone, so its stream does not
/// depend on how many workers exist.
pub struct VecEnv {
    envs: Vec<Box<dyn Env>>,
    spec: EnvSpec,
}

impl VecEnv {
    pub fn new(envs: Vec<Box<dyn Env>>) -> Result<Self> {
        let spec = envs
            .first()
            .ok_or_else(|| Error::Contract("VecEnv needs at least one worker".into()))?
            .spec()
            .clone();
        if envs.iter().any(|e| *e.spec() != spec) {
            return Err(Error::Contract("VecEnv workers must share one EnvSpec".into()));
        }
        Ok(Self { envs, spec })
    }

    pub fn from_id(id: EnvId, options: EnvOptions, workers: usize) -> Result<Self> {
        Self::new((0..workers).map(|_| make_env(id, options)).collect())
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn workers(&self) -> usize {
        self.envs.len()
    }

    pub fn worker_seed(base_seed: u64, worker: usize) -> u64 {
        derive_seed(base_seed, streams::ENV + worker as u64)
    }

    pub fn reset(&mut self, base_seed: u64) -> Vec<Vec<f64>> {
        self.envs
            .iter_mut()
            .enumerate()
            .map(|(i, env)| env.reset(Self::worker_seed(base_seed, i)))
            .collect()
    }

    /// Steps every worker once. A finished worker is restarted immediately;
    /// its result carries the first observation of the next episode.
    pub fn step(&mut self, actions: &[usize]) -> Result<Vec<StepResult>> {
        if actions.len() != self.envs.len() {
            return Err(Error::shape("vec_step actions", &[self.envs.len()], &[actions.len()]));
        }
        self.envs
            .iter_mut()
            .zip(actions)
            .enumerate()
            .map(|(worker, (env, &action))| {
                let mut result = env.step(action).map_err(|e| Error::Worker {
                    worker,
                    source: Box::new(e),
                })?;
                if result.done {
                    result.observation = env.restart();
                }
                Ok(result)
            })
            .collect()
    }

    pub fn in_stochastic_region(&self, observation: &[f64]) -> bool {
        self.envs[0].in_stochastic_region(observation)
    }
}
