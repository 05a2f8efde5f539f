//! Dense layer with explicit forward caching and backward accumulation.

use serde::{Deserialize, Serialize};

use crate::nn::ops::{prelu, prelu_backward, sigmoid_backward, sigmoid_vec};
use crate::nn::tensor::Tensor;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    PRelu(f64),
    Sigmoid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Tensor, // [out, in]
    pub bias: Tensor,   // [out]
    pub activation: Activation,
}

/// Everything backward needs: the input, pre-activation and output.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Vec<f64>,
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut Rng) -> Self {
        DenseLayer {
            weight: Tensor::xavier(&[out_dim, in_dim], rng),
            bias: Tensor::zeros(&[out_dim]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &[f64]) -> DenseCache {
        debug_assert_eq!(x.len(), self.in_dim(), "dense input width");
        let mut pre = self.weight.matvec(x);
        for (p, b) in pre.iter_mut().zip(&self.bias.data) {
            *p += b;
        }
        let out = match self.activation {
            Activation::Linear => pre.clone(),
            Activation::PRelu(slope) => prelu(&pre, slope),
            Activation::Sigmoid => sigmoid_vec(&pre),
        };
        DenseCache {
            x: x.to_vec(),
            pre,
            out,
        }
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &DenseCache, dy: &[f64]) -> Vec<f64> {
        let dpre = match self.activation {
            Activation::Linear => dy.to_vec(),
            Activation::PRelu(slope) => prelu_backward(&cache.pre, slope, dy),
            Activation::Sigmoid => sigmoid_backward(&cache.out, dy),
        };
        self.weight.matvec_accumulate_grad(&cache.x, &dpre);
        self.bias.ensure_grad();
        for (g, d) in self.bias.grad.iter_mut().zip(&dpre) {
            *g += d;
        }
        self.weight.matvec_backward_input(&dpre)
    }
}
