use super::{Array, Gradients, ParamSet};
use crate::error::{Error, Result};

/// Moment estimates for Adam, one pair per parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Array>,
    second: Vec<Array>,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &ParamSet, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Array> = params.iter().map(|(_, a)| Array::zeros(a.shape())).collect();
        Self {
            beta1,
            beta2,
            epsilon,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, index: usize) -> &Array {
        &self.first[index]
    }

    pub fn second_moment(&self, index: usize) -> &Array {
        &self.second[index]
    }
}

/// One bias-corrected Adam update in place.
///
/// Gradients are validated before anything is touched, so a NaN leaves both
/// `params` and `state` unchanged.
pub fn adam_step(params: &mut ParamSet, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if grads.len() != params.len() || state.first.len() != params.len() {
        return Err(Error::shape("adam_step", &[params.len()], &[grads.len()]));
    }
    for ((name, p), g) in params.iter().zip(grads.iter()) {
        if p.shape() != g.shape() {
            return Err(Error::shape(format!("adam gradient for `{name}`"), p.shape(), g.shape()));
        }
        g.check_finite(&format!("gradient of `{name}`"))?;
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    for (i, ((_, p), g)) in params.values_mut().zip(grads.iter()).enumerate() {
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            let update = lr * m_hat / (v_hat.sqrt() + eps);
            if update != 0.0 {
                *w -= update;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(values: Vec<f64>) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("w", Array::vector(values)).unwrap();
        p
    }

    fn grads_of(values: Vec<f64>) -> Gradients {
        Gradients::from_params(&single(values))
    }

    #[test]
    fn zero_gradient_leaves_params_bitwise_unchanged() {
        let mut p = single(vec![0.3, -1.7, 1e-300]);
        let before = p.clone();
        let mut s = AdamState::new(&p);
        for _ in 0..10 {
            adam_step(&mut p, &grads_of(vec![0.0; 3]), &mut s, 1e-2).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 10);
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let (g, lr) = (0.37, 1e-3);
        let mut p = single(vec![1.0]);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grads_of(vec![g]), &mut s, lr).unwrap();
        // m̂ = g, v̂ = g², so Δ = −lr·g/(|g|+ε)
        let expected = 1.0 - lr * g / (g.abs() + 1e-8);
        assert!((p.get("w").unwrap().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let mut p = single(vec![0.0]);
        let mut s = AdamState::new(&p);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p.get("w").unwrap().data()[0];
            adam_step(&mut p, &grads_of(vec![-4.0]), &mut s, 1e-3).unwrap();
            last = p.get("w").unwrap().data()[0] - before;
        }
        assert!((last - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn nan_gradient_names_parameter_and_aborts() {
        let mut p = single(vec![1.0, 2.0]);
        let before = p.clone();
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &grads_of(vec![0.1, f64::NAN]), &mut s, 1e-3).unwrap_err();
        assert!(err.to_string().contains("`w`"));
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 0);
    }
}
