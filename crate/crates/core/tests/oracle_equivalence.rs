mod oracles;

use oracles::*;
use pome::algorithm::{evaluate, ActionSelection, UniformPolicy};
use pome::envs::{ChainMdp, Env, EnvId, EnvOptions, GridWorld, VecEnv};
use pome::numkit::dist::{categorical_entropy, categorical_kl, categorical_logprob};
use pome::targets::{compute_tables, gae, pome_advantages, DeltaSource, MedianScope, ModelPredictions, Segment, TargetParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gae_single_element_is_identity() {
    assert_eq!(gae_bruteforce(&[0.7], &[false], 0.9, 0.9), vec![0.7]);
    assert_eq!(pome_advantages(&[0.7], &[false], 0.9, 0.9), vec![0.7]);
}

#[test]
fn gae_all_done_is_elementwise() {
    let d = [0.3, -1.0, 2.5, 0.0];
    let dones = [true; 4];
    assert_eq!(gae_bruteforce(&d, &dones, 0.99, 0.95), d.to_vec());
    assert_eq!(pome_advantages(&d, &dones, 0.99, 0.95), d.to_vec());
}

#[test]
fn gae_recursion_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let k = rng.random_range(1..=64);
        let deltas: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let dones: Vec<bool> = (0..k).map(|_| rng.random_bool(0.2)).collect();
        let gamma = rng.random_range(0.01..1.0);
        let lambda = rng.random_range(0.01..1.0);
        assert_close(
            &pome_advantages(&deltas, &dones, gamma, lambda),
            &gae_bruteforce(&deltas, &dones, gamma, lambda),
            1e-10,
            "advantages",
        );
    }
}

#[test]
fn distribution_math_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.random_range(1..=16);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..8.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..8.0)).collect();
        let a = rng.random_range(0..n);
        assert!((categorical_logprob(&p, a).unwrap() - enumerate_logprob(&p, a)).abs() <= 1e-12);
        assert!((categorical_kl(&p, &q).unwrap() - enumerate_kl(&p, &q)).abs() <= 1e-12);
        assert!((categorical_entropy(&p).unwrap() - enumerate_entropy(&p)).abs() <= 1e-12);
    }
}

fn scenario_segment(s: &Scenario) -> (Segment, ModelPredictions) {
    let k = s.rewards.len();
    let seg = Segment {
        observations: vec![vec![0.0]; k],
        actions: vec![0; k],
        rewards: s.rewards.clone(),
        dones: s.dones.clone(),
        values: s.values.clone(),
        log_probs: vec![0.0; k],
        logits: vec![vec![0.0]; k],
        next_observations: vec![vec![0.0]; k],
        bootstrap_value: s.bootstrap,
    };
    let pred = ModelPredictions {
        rewards: s.model_rewards.clone(),
        next_values: s.model_next_values.clone(),
    };
    (seg, pred)
}

fn production_trace(s: &Scenario, source: DeltaSource) -> Trace {
    let (seg, pred) = scenario_segment(s);
    let params = TargetParams {
        gamma: s.gamma,
        lambda: s.lambda,
        median_scope: MedianScope::Worker,
        source,
    };
    let t = compute_tables(&[seg], &[pred], &params).unwrap().remove(0);
    Trace {
        clip_bounds: t.delta.iter().map(|d| d.abs()).collect(),
        q_free: t.q_free,
        q_model: t.q_model,
        eps: t.eps,
        eps_bar: t.eps_bar,
        delta: t.delta,
        delta_pome: t.delta_pome,
        advantages: t.advantages,
        value_targets: t.value_targets,
    }
}

fn assert_trace(actual: &Trace, expected: &Trace, tol: f64) {
    assert_close(&actual.q_free, &expected.q_free, tol, "q_free");
    assert_close(&actual.q_model, &expected.q_model, tol, "q_model");
    assert_close(&actual.eps, &expected.eps, tol, "eps");
    assert!((actual.eps_bar - expected.eps_bar).abs() <= tol, "eps_bar {} vs {}", actual.eps_bar, expected.eps_bar);
    assert_close(&actual.delta, &expected.delta, tol, "delta");
    assert_close(&actual.clip_bounds, &expected.clip_bounds, tol, "clip bounds");
    assert_close(&actual.delta_pome, &expected.delta_pome, tol, "delta_pome");
    assert_close(&actual.advantages, &expected.advantages, tol, "advantages");
    assert_close(&actual.value_targets, &expected.value_targets, tol, "value targets");
}

fn fixture_a(alpha: f64) -> Scenario {
    Scenario {
        rewards: vec![1.0, 0.0, 0.0, 1.0],
        dones: vec![false; 4],
        values: vec![0.5; 4],
        bootstrap: 0.5,
        model_rewards: vec![0.5, 0.5, 0.0, 0.0],
        model_next_values: vec![0.5; 4],
        gamma: 0.5,
        lambda: 0.5,
        alpha,
    }
}

// Worked by hand with γ = λ = 0.5, α = 0.1.
fn fixture_a_expected() -> Trace {
    Trace {
        q_free: vec![1.25, 0.25, 0.25, 1.25],
        q_model: vec![0.75, 0.75, 0.25, 0.25],
        eps: vec![0.5, 0.5, 0.0, 1.0],
        eps_bar: 0.5,
        delta: vec![0.75, -0.25, -0.25, 0.75],
        clip_bounds: vec![0.75, 0.25, 0.25, 0.75],
        delta_pome: vec![0.75, -0.25, -0.275, 0.8],
        advantages: vec![0.6828125, -0.26875, -0.075, 0.8],
        value_targets: vec![1.1828125, 0.23125, 0.425, 1.3],
    }
}

#[test]
fn microtrace_fixture_a() {
    let s = fixture_a(0.1);
    let expected = fixture_a_expected();
    assert_trace(&microtrace(&s), &expected, 1e-12);
    let production = production_trace(&s, DeltaSource::Pome { alpha: 0.1, clip: true });
    assert_trace(&production, &expected, 1e-12);
}

#[test]
fn microtrace_fixture_b_alpha_zero_is_ppo() {
    let s = fixture_a(0.0);
    let pome = production_trace(&s, DeltaSource::Pome { alpha: 0.0, clip: true });
    let ppo = production_trace(&s, DeltaSource::ModelFree);
    assert_eq!(pome, ppo);
    assert_close(&ppo.advantages, &[0.68359375, -0.265625, -0.0625, 0.75], 1e-12, "ppo advantages");
    assert_trace(&microtrace(&s), &ppo, 1e-12);

    let (seg, _) = scenario_segment(&s);
    let (adv, ret) = gae(&seg, s.gamma, s.lambda);
    assert_eq!(adv, ppo.advantages);
    assert_eq!(ret, ppo.value_targets);
}

#[test]
fn microtrace_fixture_c_even_median_and_done() {
    let s = Scenario {
        rewards: vec![0.0; 4],
        dones: vec![false, true, false, false],
        values: vec![0.2; 4],
        bootstrap: 0.2,
        model_rewards: vec![0.1, -0.7, 0.3, 0.9],
        model_next_values: vec![0.2; 4],
        gamma: 0.5,
        lambda: 1.0,
        alpha: 0.5,
    };
    let expected = Trace {
        q_free: vec![0.1, 0.0, 0.1, 0.1],
        q_model: vec![0.2, -0.7, 0.4, 1.0],
        eps: vec![0.1, 0.7, 0.3, 0.9],
        eps_bar: 0.5,
        delta: vec![-0.1, -0.2, -0.1, -0.1],
        clip_bounds: vec![0.1, 0.2, 0.1, 0.1],
        delta_pome: vec![-0.15, -0.1, -0.15, -0.05],
        advantages: vec![-0.2, -0.1, -0.175, -0.05],
        value_targets: vec![0.0, 0.1, 0.025, 0.15],
    };
    assert_trace(&microtrace(&s), &expected, 1e-12);
    let production = production_trace(&s, DeltaSource::Pome { alpha: 0.5, clip: true });
    assert_trace(&production, &expected, 1e-12);
}

#[test]
fn chain_optimum_is_always_right() {
    let m = chain_kernel(20, 0.001);
    let v = m.value_iteration(0.99);
    let policy = m.greedy(&v, 0.99);
    assert!(policy[..19].iter().all(|&a| a == 1));
    assert!((m.optimal_finite_horizon_return(100) - 1.0).abs() < 1e-12);
    assert!((v[0] - 0.99f64.powi(18)).abs() < 1e-9);
}

#[test]
fn detgrid_optimum() {
    let m = detgrid_kernel(5);
    let v = m.value_iteration(0.99);
    let expected_discounted: f64 = (0..7).map(|t| -0.01 * 0.99f64.powi(t)).sum::<f64>() + 0.99 * 0.99f64.powi(7);
    assert!((v[m.start] - expected_discounted).abs() < 1e-9);
    let policy = m.greedy(&v, 0.99);
    assert!((m.finite_horizon_return(&policy, 100) - 0.92).abs() < 1e-12);
}

// Frozen from the value-iteration oracle.
const CORRIDOR_OPTIMAL_RETURN: f64 = 0.6540173969333696;

#[test]
fn corridor_optimum_frozen() {
    let m = corridor_kernel();
    let v = m.value_iteration(0.99);
    let policy = m.greedy(&v, 0.99);
    let ret = m.finite_horizon_return(&policy, 100);
    assert!((ret - CORRIDOR_OPTIMAL_RETURN).abs() < 1e-9, "{ret}");
    assert!(ret < 0.92 && ret > 0.5);
}

/// Every observed transition must be possible under the oracle kernel with the same reward.
fn check_against_kernel(env: &mut dyn Env, kernel: &Tabular, decode: impl Fn(&[f64]) -> usize, seed: u64, steps: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = env.reset(seed);
    let mut t = 0;
    for _ in 0..steps {
        let s = decode(&obs);
        let a = rng.random_range(0..kernel.actions());
        let r = env.step(a).unwrap();
        t += 1;
        let next = decode(&r.observation);
        let hit = kernel.kernel[s][a]
            .iter()
            .find(|o| o.next == next && (o.reward - r.reward).abs() < 1e-15)
            .unwrap_or_else(|| panic!("transition {s} -{a}-> {next} r={} not in kernel", r.reward));
        if hit.terminal {
            assert!(r.done);
        }
        if r.done {
            assert!(hit.terminal || t == 100 || t == 5 * kernel.states());
            obs = env.restart();
            t = 0;
        } else {
            obs = r.observation;
        }
    }
}

fn position(obs: &[f64]) -> usize {
    assert_eq!(obs.iter().filter(|&&v| v == 1.0).count(), 1);
    obs.iter().position(|&v| v == 1.0).unwrap()
}

#[test]
fn environments_agree_with_kernels() {
    check_against_kernel(&mut ChainMdp::new(7, false), &chain_kernel(7, 0.001), position, 0, 5000);
    check_against_kernel(&mut ChainMdp::new(7, true), &chain_kernel(7, 0.0), position, 1, 5000);
    check_against_kernel(&mut GridWorld::det_grid(4), &detgrid_kernel(4), position, 2, 5000);
    check_against_kernel(&mut GridWorld::noisy_corridor(), &corridor_kernel(), position, 3, 20000);
}

#[test]
fn corridor_noise_is_uniform() {
    let mut env = GridWorld::noisy_corridor();
    let kernel = corridor_kernel();
    env.reset(9);
    // Walk right into the noisy band, then count outcomes from its first column.
    let mut counts = std::collections::HashMap::new();
    let mut trials = 0;
    while trials < 8000 {
        let mut obs = env.restart();
        for _ in 0..3 {
            obs = env.step(3).unwrap().observation;
        }
        assert_eq!(position(&obs), 2 * 9 + 3);
        let r = env.step(0).unwrap();
        *counts.entry(position(&r.observation)).or_insert(0usize) += 1;
        trials += 1;
    }
    for o in &kernel.kernel[2 * 9 + 3][0] {
        let freq = counts[&o.next] as f64 / trials as f64;
        assert!((freq - 0.25).abs() < 0.025, "{} -> {freq}", o.next);
    }
}

#[test]
fn chain_random_walk_matches_dynamic_programming() {
    let n = 6;
    let expected = chain_random_walk_return(n, 0.001, 5 * n);
    let mut env = ChainMdp::new(n, false);
    let episodes = 20_000;
    let s = evaluate(&UniformPolicy(2), &mut env, episodes, 17, ActionSelection::Sample).unwrap();
    let se = s.stddev / (episodes as f64).sqrt();
    assert!((s.mean - expected).abs() < 4.0 * se, "{} vs {expected} (se {se})", s.mean);
}

#[test]
fn vec_env_workers_follow_kernel() {
    let mut venv = VecEnv::from_id(EnvId::DetGrid(3), EnvOptions::default(), 4).unwrap();
    let kernel = detgrid_kernel(3);
    let mut obs = venv.reset(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let actions: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
        let results = venv.step(&actions).unwrap();
        for (w, r) in results.into_iter().enumerate() {
            let s = position(&obs[w]);
            let o = kernel.kernel[s][actions[w]][0];
            assert_eq!(r.reward, o.reward);
            if r.done {
                assert_eq!(position(&r.observation), 0, "finished workers restart");
            } else {
                assert_eq!(position(&r.observation), o.next);
            }
            obs[w] = r.observation;
        }
    }
}
