//! Global-norm gradient clipping and the Adam optimizer.

use serde::{Deserialize, Serialize};

use super::tensor::Parameters;
use crate::error::{Error, Result};

/// Rescales `grads` so their global L2 norm is at most `threshold`.
/// Returns the norm before clipping.
pub fn clip_gradients<P: Parameters + ?Sized>(grads: &mut P, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clip threshold must be positive, got {threshold}"
        )));
    }
    let norm = grads.global_norm();
    if norm > threshold {
        grads.scale(threshold / norm);
    }
    Ok(norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

/// Moment estimates, flattened in the parameter visiting order.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let n = params.parameter_count();
        AdamState {
            config,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected update of `params` using `grads`.
    pub fn update<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        Error::check_dim("adam parameter count", self.m.len(), params.parameter_count())?;
        Error::check_dim("adam gradient count", self.m.len(), grads.parameter_count())?;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let mut idx = 0;
        for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            for (w, &gv) in p.data.iter_mut().zip(&g.data) {
                let m = beta1 * self.m[idx] + (1.0 - beta1) * gv;
                let v = beta2 * self.v[idx] + (1.0 - beta2) * gv * gv;
                self.m[idx] = m;
                self.v[idx] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                idx += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    #[derive(Clone, Debug)]
    struct Flat(Tensor);

    impl Parameters for Flat {
        fn tensors(&self) -> Vec<&Tensor> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
            vec![&mut self.0]
        }
    }

    fn flat(values: &[f64]) -> Flat {
        Flat(Tensor {
            name: "p".into(),
            shape: vec![values.len()],
            data: values.to_vec(),
        })
    }

    #[test]
    fn clipping_rules() {
        let mut g = flat(&[0.3, 0.4]);
        assert_eq!(clip_gradients(&mut g, 1.0).unwrap(), 0.5);
        assert_eq!(g.0.data, vec![0.3, 0.4]);

        let mut g = flat(&[0.0, 4.0]);
        clip_gradients(&mut g, 1.0).unwrap();
        assert_eq!(g.0.data, vec![0.0, 1.0]);
        assert!((g.global_norm() - 1.0).abs() < 1e-15);

        let mut g = flat(&[0.0, 0.0]);
        clip_gradients(&mut g, 1.0).unwrap();
        assert_eq!(g.0.data, vec![0.0, 0.0]);

        assert!(clip_gradients(&mut g, 0.0).is_err());
    }

    #[test]
    fn clipping_is_idempotent_and_keeps_direction() {
        let mut g = flat(&[3.0, -4.0, 12.0]);
        clip_gradients(&mut g, 1.0).unwrap();
        let once = g.0.data.clone();
        clip_gradients(&mut g, 1.0).unwrap();
        assert_eq!(g.0.data, once);
        let ratio = once[0] / 3.0;
        assert!((once[1] / -4.0 - ratio).abs() < 1e-15);
        assert!((once[2] / 12.0 - ratio).abs() < 1e-15);
    }

    #[test]
    fn first_step_is_learning_rate_times_sign() {
        let mut p = flat(&[1.0]);
        let g = flat(&[0.5]);
        let mut adam = AdamState::new(&p, AdamConfig::with_learning_rate(1e-3));
        adam.update(&mut p, &g).unwrap();
        let delta = p.0.data[0] - 1.0;
        let expected = -1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((delta - expected).abs() < 1e-15);
        assert!((delta + 9.99999e-4).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = flat(&[1.0, -2.0]);
        let g = flat(&[0.0, 0.0]);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        for _ in 0..5 {
            adam.update(&mut p, &g).unwrap();
        }
        assert_eq!(p.0.data, vec![1.0, -2.0]);
    }

    #[test]
    fn two_steps_match_hand_unrolled_recurrence() {
        let (lr, b1, b2, eps) = (0.01, 0.9, 0.999, 1e-8);
        let g = 0.3;
        let mut p = flat(&[2.0]);
        let grads = flat(&[g]);
        let mut adam = AdamState::new(&p, AdamConfig::with_learning_rate(lr));
        adam.update(&mut p, &grads).unwrap();
        adam.update(&mut p, &grads).unwrap();

        let mut w = 2.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - f64::powi(b1, t));
            let v_hat = v / (1.0 - f64::powi(b2, t));
            w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert!((p.0.data[0] - w).abs() < 1e-12);
        assert!(adam.second_moment().iter().all(|&v| v >= 0.0));
        assert_eq!(adam.step, 2);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut p = flat(&[0.25, 7.0]);
        let g = flat(&[1.0, -3.0]);
        let mut adam = AdamState::new(&p, AdamConfig::with_learning_rate(0.0));
        for _ in 0..3 {
            adam.update(&mut p, &g).unwrap();
        }
        assert_eq!(p.0.data, vec![0.25, 7.0]);
    }
}
