use crate::nn::Scalar;
use crate::{Error, Result};

/// AdamW hyperparameters. The learning rate is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, kept in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One AdamW update with decoupled weight decay:
/// `θ ← θ − lr·(m̂/(√v̂ + ε) + wd·θ)`.
///
/// A non-finite gradient rejects the step and leaves `params` and `state`
/// untouched.
pub fn optimizer_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::Shape(format!(
            "optimizer: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!(
            "gradient {i} is {:?} at step {}",
            grads[i],
            state.step + 1
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        let g = g.to_f64().expect("finite");
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let theta = p.to_f64().expect("finite");
        let update = (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps) + cfg.weight_decay * theta;
        *p = T::of(theta - cfg.learning_rate * update);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = vec![1.5f64, -2.0];
        let mut s = AdamState::new(2);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        optimizer_step(&mut p, &[0.0, 0.0], &mut s, &cfg).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn single_step_matches_closed_form() {
        let mut p = vec![0.5f64];
        let mut s = AdamState::new(1);
        let cfg = AdamConfig {
            weight_decay: 0.01,
            ..Default::default()
        };
        optimizer_step(&mut p, &[1.0], &mut s, &cfg).unwrap();
        // m̂ = 1 and v̂ = 1 after one step.
        let expect = 0.5 - 1e-3 * (1.0 / (1.0 + 1e-8) + 0.01 * 0.5);
        assert!((p[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn decay_alone_shrinks_geometrically() {
        let mut p = vec![2.0f64];
        let mut s = AdamState::new(1);
        let cfg = AdamConfig::default();
        optimizer_step(&mut p, &[0.0], &mut s, &cfg).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 1e-3 * 1e-4)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut p = vec![1.0f32, 2.0];
        let mut s = AdamState::new(2);
        let before = (p.clone(), s.clone());
        let err = optimizer_step(&mut p, &[0.1, f32::NAN], &mut s, &AdamConfig::default());
        assert!(matches!(err, Err(Error::NonFiniteGradient(_))));
        assert_eq!((p, s), before);
    }
}
