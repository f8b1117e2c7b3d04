//! Categorical distributions parameterised by logits.

use super::graph::log_softmax;
use crate::error::{Error, Result};

fn check_logits(logits: &[f64], what: &str) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::Contract(format!("{what}: empty logits")));
    }
    if let Some(v) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} logits ({v})")));
    }
    Ok(())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// `log softmax(logits)[action]`.
pub fn categorical_logprob(logits: &[f64], action: usize) -> Result<f64> {
    check_logits(logits, "logprob")?;
    if action >= logits.len() {
        return Err(Error::Index {
            context: "categorical action".into(),
            index: action,
            size: logits.len(),
        });
    }
    Ok(log_softmax(logits)[action])
}

/// `KL[p ‖ q]` for the distributions with logits `p` and `q`.
pub fn categorical_kl(logits_p: &[f64], logits_q: &[f64]) -> Result<f64> {
    check_logits(logits_p, "kl p")?;
    check_logits(logits_q, "kl q")?;
    if logits_p.len() != logits_q.len() {
        return Err(Error::shape("categorical_kl", &[logits_p.len()], &[logits_q.len()]));
    }
    let lp = log_softmax(logits_p);
    let lq = log_softmax(logits_q);
    Ok(lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum())
}

pub fn categorical_entropy(logits: &[f64]) -> Result<f64> {
    check_logits(logits, "entropy")?;
    Ok(-log_softmax(logits).iter().map(|l| l.exp() * l).sum::<f64>())
}

/// Inverse-CDF sample given a uniform draw `u ∈ [0, 1)`.
pub fn sample_categorical(logits: &[f64], u: f64) -> usize {
    let probs = softmax(logits);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// First index of the largest logit.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in logits.iter().enumerate() {
        if *v > logits[best] {
            best = i;
        }
    }
    best
}
