//! Brute-force reference implementations. Nothing here calls into the
//! production target, distribution or environment code.

#![allow(dead_code)]

/// `Â_t = Σ_j (γλ)^j δ_{t+j}`, summed directly and stopped after the first
/// terminal step at or after `t`.
pub fn gae_bruteforce(deltas: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    assert!(deltas.len() <= 64 && deltas.len() == dones.len());
    let mut out = vec![0.0; deltas.len()];
    for t in 0..deltas.len() {
        let mut total = 0.0;
        for j in 0..(deltas.len() - t) {
            total += (gamma * lambda).powi(j as i32) * deltas[t + j];
            if dones[t + j] {
                break;
            }
        }
        out[t] = total;
    }
    out
}

/// Probabilities by direct exponentiation and normalisation.
pub fn enumerate_probs(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

pub fn enumerate_logprob(logits: &[f64], action: usize) -> f64 {
    enumerate_probs(logits)[action].ln()
}

pub fn enumerate_kl(p_logits: &[f64], q_logits: &[f64]) -> f64 {
    let p = enumerate_probs(p_logits);
    let q = enumerate_probs(q_logits);
    p.iter().zip(&q).map(|(a, b)| if *a == 0.0 { 0.0 } else { a * (a.ln() - b.ln()) }).sum()
}

pub fn enumerate_entropy(logits: &[f64]) -> f64 {
    enumerate_probs(logits).iter().map(|p| if *p == 0.0 { 0.0 } else { -p * p.ln() }).sum()
}

/// One possible outcome of taking an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub next: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// Explicit transition kernel `kernel[s][a]`.
#[derive(Debug, Clone)]
pub struct Tabular {
    pub kernel: Vec<Vec<Vec<Outcome>>>,
    pub start: usize,
}

impl Tabular {
    pub fn states(&self) -> usize {
        self.kernel.len()
    }

    pub fn actions(&self) -> usize {
        self.kernel[0].len()
    }

    fn q(&self, v: &[f64], s: usize, a: usize, gamma: f64) -> f64 {
        self.kernel[s][a]
            .iter()
            .map(|o| o.prob * (o.reward + if o.terminal { 0.0 } else { gamma * v[o.next] }))
            .sum()
    }

    /// Optimal values to a 1e-10 sup-norm fixed point.
    pub fn value_iteration(&self, gamma: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.states()];
        for _ in 0..1_000_000 {
            let next: Vec<f64> = (0..self.states())
                .map(|s| (0..self.actions()).map(|a| self.q(&v, s, a, gamma)).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let gap = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if gap < 1e-10 {
                return v;
            }
        }
        panic!("value iteration did not converge");
    }

    /// First maximising action per state.
    pub fn greedy(&self, v: &[f64], gamma: f64) -> Vec<usize> {
        (0..self.states())
            .map(|s| {
                let qs: Vec<f64> = (0..self.actions()).map(|a| self.q(v, s, a, gamma)).collect();
                let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                qs.iter().position(|&q| q >= best - 1e-12).unwrap()
            })
            .collect()
    }

    /// Expected undiscounted return from the start state within `horizon` steps.
    pub fn finite_horizon_return(&self, policy: &[usize], horizon: usize) -> f64 {
        let mut v = vec![0.0; self.states()];
        for _ in 0..horizon {
            v = (0..self.states()).map(|s| self.q(&v, s, policy[s], 1.0)).collect();
        }
        v[self.start]
    }

    /// Undiscounted optimum within `horizon` steps (backward induction).
    pub fn optimal_finite_horizon_return(&self, horizon: usize) -> f64 {
        let mut v = vec![0.0; self.states()];
        for _ in 0..horizon {
            v = (0..self.states())
                .map(|s| (0..self.actions()).map(|a| self.q(&v, s, a, 1.0)).fold(f64::NEG_INFINITY, f64::max))
                .collect();
        }
        v[self.start]
    }
}

fn det(next: usize, reward: f64, terminal: bool) -> Vec<Outcome> {
    vec![Outcome {
        prob: 1.0,
        next,
        reward,
        terminal,
    }]
}

/// Chain of `n` cells; action 0 is left, 1 is right.
pub fn chain_kernel(n: usize, trap: f64) -> Tabular {
    let kernel = (0..n)
        .map(|s| {
            let left = if s == 0 { det(0, trap, true) } else { det(s - 1, 0.0, false) };
            let right = if s + 1 == n - 1 { det(s + 1, 1.0, true) } else { det((s + 1).min(n - 1), 0.0, false) };
            vec![left, right]
        })
        .collect();
    Tabular { kernel, start: 0 }
}

/// Grid kernel, actions up/down/left/right, walls block, −0.01 per step and
/// +1 on reaching the goal. Noisy columns pick one of the four moves uniformly.
pub fn grid_kernel(rows: usize, cols: usize, start: (usize, usize), goal: (usize, usize), noisy: Option<(usize, usize)>) -> Tabular {
    let index = |r: usize, c: usize| r * cols + c;
    let shift = |r: usize, c: usize, a: usize| -> (usize, usize) {
        let (dr, dc): (i64, i64) = [(-1, 0), (1, 0), (0, -1), (0, 1)][a];
        let nr = r as i64 + dr;
        let nc = c as i64 + dc;
        if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
            (r, c)
        } else {
            (nr as usize, nc as usize)
        }
    };
    let mut kernel = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let is_noisy = noisy.is_some_and(|(lo, hi)| c >= lo && c <= hi);
            let mut per_action = Vec::with_capacity(4);
            for a in 0..4 {
                let moves: Vec<(f64, usize)> = if is_noisy { (0..4).map(|d| (0.25, d)).collect() } else { vec![(1.0, a)] };
                let outcomes = moves
                    .into_iter()
                    .map(|(prob, d)| {
                        let (nr, nc) = shift(r, c, d);
                        let terminal = (nr, nc) == goal;
                        Outcome {
                            prob,
                            next: index(nr, nc),
                            reward: if terminal { 0.99 } else { -0.01 },
                            terminal,
                        }
                    })
                    .collect();
                per_action.push(outcomes);
            }
            kernel.push(per_action);
        }
    }
    Tabular {
        kernel,
        start: index(start.0, start.1),
    }
}

pub fn detgrid_kernel(n: usize) -> Tabular {
    grid_kernel(n, n, (0, 0), (n - 1, n - 1), None)
}

pub fn corridor_kernel() -> Tabular {
    grid_kernel(5, 9, (2, 0), (2, 8), Some((3, 5)))
}

/// Expected return of the uniform random policy on a chain with a step cap,
/// by forward propagation of the cell distribution.
pub fn chain_random_walk_return(n: usize, trap: f64, cap: usize) -> f64 {
    let mut mass = vec![0.0; n];
    mass[0] = 1.0;
    let mut expected = 0.0;
    for _ in 0..cap {
        let mut next = vec![0.0; n];
        for (s, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            if s == 0 {
                expected += 0.5 * m * trap;
            } else {
                next[s - 1] += 0.5 * m;
            }
            if s + 1 == n - 1 {
                expected += 0.5 * m;
            } else {
                next[s + 1] += 0.5 * m;
            }
        }
        mass = next;
    }
    expected
}

/// Every intermediate of the target pipeline for one worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub q_free: Vec<f64>,
    pub q_model: Vec<f64>,
    pub eps: Vec<f64>,
    pub eps_bar: f64,
    pub delta: Vec<f64>,
    pub clip_bounds: Vec<f64>,
    pub delta_pome: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

/// Scenario inputs for [`microtrace`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    pub bootstrap: f64,
    pub model_rewards: Vec<f64>,
    pub model_next_values: Vec<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
}

/// Straight-line evaluation of one POME target computation.
pub fn microtrace(s: &Scenario) -> Trace {
    let k = s.rewards.len();
    let mut q_free = Vec::new();
    let mut q_model = Vec::new();
    for t in 0..k {
        let next_v = if t + 1 < k { s.values[t + 1] } else { s.bootstrap };
        let live = if s.dones[t] { 0.0 } else { 1.0 };
        q_free.push(s.rewards[t] + s.gamma * live * next_v);
        q_model.push(s.model_rewards[t] + s.gamma * live * s.model_next_values[t]);
    }
    let eps: Vec<f64> = (0..k).map(|t| (q_model[t] - q_free[t]).abs()).collect();
    let mut sorted = eps.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps_bar = if k % 2 == 1 { sorted[k / 2] } else { 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]) };
    let delta: Vec<f64> = (0..k).map(|t| q_free[t] - s.values[t]).collect();
    let clip_bounds: Vec<f64> = delta.iter().map(|d| d.abs()).collect();
    let delta_pome: Vec<f64> = (0..k)
        .map(|t| {
            let centred = eps[t] - eps_bar;
            let b = clip_bounds[t];
            let clipped = if centred > b {
                b
            } else if centred < -b {
                -b
            } else {
                centred
            };
            delta[t] + s.alpha * clipped
        })
        .collect();
    let dones = s.dones.clone();
    let advantages = gae_bruteforce(&delta_pome, &dones, s.gamma, s.lambda);
    let value_targets = (0..k).map(|t| advantages[t] + s.values[t]).collect();
    Trace {
        q_free,
        q_model,
        eps,
        eps_bar,
        delta,
        clip_bounds,
        delta_pome,
        advantages,
        value_targets,
    }
}

/// `|a − b| ≤ tol` elementwise.
pub fn assert_close(actual: &[f64], expected: &[f64], tol: f64, what: &str) {
    assert_eq!(actual.len(), expected.len(), "{what}: length");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!((a - e).abs() <= tol, "{what}[{i}]: {a} vs {e} (tol {tol})");
    }
}
