use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{matvec_acc, matvec_t_acc, outer_acc, Parameters, Tensor};
use crate::error::{Error, Result};

/// Affine layer `y = W x + b` with no activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn zeros(prefix: &str, input_dim: usize, output_dim: usize) -> Self {
        Dense {
            input_dim,
            output_dim,
            weight: Tensor::zeros(format!("{prefix}.weight"), &[output_dim, input_dim]),
            bias: Tensor::zeros(format!("{prefix}.bias"), &[output_dim]),
        }
    }

    pub fn init<R: Rng>(prefix: &str, input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let mut d = Dense::zeros(prefix, input_dim, output_dim);
        let bound = 1.0 / (input_dim as f64).sqrt();
        d.weight
            .data
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..bound));
        d
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim("dense input", self.input_dim, x.len())?;
        let mut y = self.bias.data.clone();
        matvec_acc(&self.weight.data, x, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], d_out: &[f64], grads: &mut Dense) -> Vec<f64> {
        outer_acc(&mut grads.weight.data, d_out, x);
        grads
            .bias
            .data
            .iter_mut()
            .zip(d_out)
            .for_each(|(b, d)| *b += d);
        let mut dx = vec![0.0; self.input_dim];
        matvec_t_acc(&self.weight.data, d_out, &mut dx);
        dx
    }

    pub fn zeros_like(&self) -> Dense {
        Dense {
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            weight: self.weight.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }
}

impl Parameters for Dense {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}
