use rand::{Rng as _, SeedableRng};

use super::{check_action, one_hot, Env, EnvSpec, StepResult};
use crate::error::{Error, Result};
use crate::seeding::Rng;

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

pub const STEP_REWARD: f64 = -0.01;
pub const GOAL_REWARD: f64 = 1.0;
pub const EPISODE_CAP: usize = 100;

/// Four-action gridworld. Moves into a wall leave the agent in place.
///
/// Every step costs 0.01; entering the goal additionally pays +1 and ends
/// the episode. Inside the optional band of noisy columns the chosen action
/// is replaced by a uniformly random direction.
#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: EnvSpec,
    rows: usize,
    cols: usize,
    start: (usize, usize),
    goal: (usize, usize),
    noisy_cols: Option<(usize, usize)>,
    rng: Rng,
    pos: (usize, usize),
    steps: usize,
    episode_return: f64,
    finished: bool,
}

impl GridWorld {
    pub fn new(
        rows: usize,
        cols: usize,
        start: (usize, usize),
        goal: (usize, usize),
        noisy_cols: Option<(usize, usize)>,
    ) -> Self {
        assert!(start.0 < rows && start.1 < cols && goal.0 < rows && goal.1 < cols);
        Self {
            spec: EnvSpec::unit_box(rows * cols, 4),
            rows,
            cols,
            start,
            goal,
            noisy_cols,
            rng: Rng::seed_from_u64(0),
            pos: start,
            steps: 0,
            episode_return: 0.0,
            finished: false,
        }
    }

    /// `size`×`size` deterministic grid from the top-left to the bottom-right corner.
    pub fn det_grid(size: usize) -> Self {
        Self::new(size, size, (0, 0), (size - 1, size - 1), None)
    }

    /// 5×9 corridor, start and goal on the middle row at opposite ends,
    /// columns 3..=5 noisy.
    pub fn noisy_corridor() -> Self {
        Self::new(5, 9, (2, 0), (2, 8), Some((3, 5)))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn noisy_cols(&self) -> Option<(usize, usize)> {
        self.noisy_cols
    }

    pub fn is_noisy(&self, cell: (usize, usize)) -> bool {
        self.noisy_cols.is_some_and(|(lo, hi)| cell.1 >= lo && cell.1 <= hi)
    }

    pub fn encode_observation(&self, cell: (usize, usize)) -> Vec<f64> {
        one_hot(self.rows * self.cols, cell.0 * self.cols + cell.1)
    }

    pub fn decode_observation(&self, observation: &[f64]) -> Option<(usize, usize)> {
        let idx = observation.iter().position(|&v| v == 1.0)?;
        Some((idx / self.cols, idx % self.cols))
    }

    /// Deterministic successor of `cell` under `direction`.
    pub fn move_from(&self, cell: (usize, usize), direction: usize) -> (usize, usize) {
        let (r, c) = cell;
        match direction {
            UP => (r.saturating_sub(1), c),
            DOWN => ((r + 1).min(self.rows - 1), c),
            LEFT => (r, c.saturating_sub(1)),
            _ => (r, (c + 1).min(self.cols - 1)),
        }
    }
}

impl Env for GridWorld {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = Rng::seed_from_u64(seed);
        self.restart()
    }

    fn restart(&mut self) -> Vec<f64> {
        self.pos = self.start;
        self.steps = 0;
        self.episode_return = 0.0;
        self.finished = false;
        self.encode_observation(self.pos)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 4)?;
        if self.finished {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        let direction = if self.is_noisy(self.pos) {
            self.rng.random_range(0..4)
        } else {
            action
        };
        self.pos = self.move_from(self.pos, direction);
        self.steps += 1;
        let mut reward = STEP_REWARD;
        let at_goal = self.pos == self.goal;
        if at_goal {
            reward += GOAL_REWARD;
        }
        let done = at_goal || self.steps >= EPISODE_CAP;
        self.episode_return += reward;
        self.finished = done;
        Ok(StepResult {
            observation: self.encode_observation(self.pos),
            reward,
            done,
            episode_return: done.then_some(self.episode_return),
        })
    }

    fn in_stochastic_region(&self, observation: &[f64]) -> bool {
        self.decode_observation(observation).is_some_and(|cell| self.is_noisy(cell))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_grid_starts_top_left() {
        let mut g = GridWorld::det_grid(5);
        let obs = g.reset(3);
        assert_eq!(obs.len(), 25);
        assert_eq!(obs[0], 1.0);
    }

    #[test]
    fn corridor_start_is_seed_independent() {
        let mut a = GridWorld::noisy_corridor();
        let mut b = GridWorld::noisy_corridor();
        assert_eq!(a.reset(0), b.reset(0));
        assert_eq!(a.reset(0), b.reset(1));
    }

    #[test]
    fn shortest_path_return() {
        let mut g = GridWorld::det_grid(5);
        g.reset(0);
        let mut total = 0.0;
        for a in [RIGHT, RIGHT, RIGHT, RIGHT, DOWN, DOWN, DOWN, DOWN] {
            let r = g.step(a).unwrap();
            total += r.reward;
            if r.done {
                assert_eq!(r.episode_return, Some(total));
            }
        }
        assert!((total - 0.92).abs() < 1e-12);
    }

    #[test]
    fn walls_block() {
        let mut g = GridWorld::det_grid(5);
        let start = g.reset(0);
        let r = g.step(UP).unwrap();
        assert_eq!(r.observation, start);
        assert_eq!(r.reward, STEP_REWARD);
    }

    #[test]
    fn cap_terminates() {
        let mut g = GridWorld::det_grid(5);
        g.reset(0);
        let mut n = 0;
        loop {
            n += 1;
            if g.step(UP).unwrap().done {
                break;
            }
        }
        assert_eq!(n, EPISODE_CAP);
    }

    #[test]
    fn noisy_zone_membership() {
        let g = GridWorld::noisy_corridor();
        assert!(!g.in_stochastic_region(&g.encode_observation((2, 2))));
        assert!(g.in_stochastic_region(&g.encode_observation((0, 3))));
        assert!(g.in_stochastic_region(&g.encode_observation((4, 5))));
        assert!(!g.in_stochastic_region(&g.encode_observation((2, 6))));
    }
}
