use super::{check_action, one_hot, Env, EnvSpec, StepResult};
use crate::error::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Reward for stepping off the left end of the chain.
pub const TRAP_REWARD: f64 = 0.001;

/// Linear chain of `length` cells starting at the leftmost one.
///
/// RIGHT into the last cell pays +1 and ends the episode; LEFT from the
/// first cell pays a small trap reward and ends it. Every other move pays 0.
/// Episodes are cut after `5 * length` steps.
#[derive(Debug, Clone)]
pub struct ChainMdp {
    spec: EnvSpec,
    length: usize,
    cap: usize,
    trap_reward: f64,
    cell: usize,
    steps: usize,
    episode_return: f64,
    finished: bool,
}

impl ChainMdp {
    pub fn new(length: usize, sparse_reward: bool) -> Self {
        assert!(length >= 2, "chain needs at least two cells");
        Self {
            spec: EnvSpec::unit_box(length, 2),
            length,
            cap: 5 * length,
            trap_reward: if sparse_reward { 0.0 } else { TRAP_REWARD },
            cell: 0,
            steps: 0,
            episode_return: 0.0,
            finished: false,
        }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn episode_cap(&self) -> usize {
        self.cap
    }

    pub fn encode_observation(&self, cell: usize) -> Vec<f64> {
        one_hot(self.length, cell)
    }
}

impl Env for ChainMdp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.restart()
    }

    fn restart(&mut self) -> Vec<f64> {
        self.cell = 0;
        self.steps = 0;
        self.episode_return = 0.0;
        self.finished = false;
        self.encode_observation(0)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 2)?;
        if self.finished {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        self.steps += 1;
        let (reward, mut done) = match action {
            LEFT if self.cell == 0 => (self.trap_reward, true),
            LEFT => {
                self.cell -= 1;
                (0.0, false)
            }
            _ => {
                self.cell += 1;
                if self.cell == self.length - 1 {
                    (1.0, true)
                } else {
                    (0.0, false)
                }
            }
        };
        if self.steps >= self.cap {
            done = true;
        }
        self.episode_return += reward;
        self.finished = done;
        Ok(StepResult {
            observation: self.encode_observation(self.cell),
            reward,
            done,
            episode_return: done.then_some(self.episode_return),
        })
    }
}
