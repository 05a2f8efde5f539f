//! Flat f64 tensors with a same-shape gradient accumulator.

use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    /// Xavier-style uniform init in (-a, a), a = sqrt(6 / (fan_in + fan_out)).
    pub fn xavier(shape: &[usize], rng: &mut Rng) -> Self {
        let mut t = Tensor::zeros(shape);
        let (fan_out, fan_in) = match shape {
            [o, i] => (*o, *i),
            [o] => (*o, *o),
            _ => panic!("xavier init expects 1-d or 2-d shapes"),
        };
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut t.data {
            *v = rng.range(-a, a);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn ensure_grad(&mut self) {
        if self.grad.len() != self.data.len() {
            self.grad = vec![0.0; self.data.len()];
        }
    }

    /// Matrix-vector product for a [out, in] tensor.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.shape.len(), 2);
        let (out, inp) = (self.shape[0], self.shape[1]);
        debug_assert_eq!(x.len(), inp);
        let mut y = vec![0.0; out];
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * inp..(i + 1) * inp];
            let mut acc = 0.0;
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            *yi = acc;
        }
        y
    }

    /// x-gradient of `matvec`: W^T dy.
    pub fn matvec_backward_input(&self, dy: &[f64]) -> Vec<f64> {
        let inp = self.shape[1];
        let mut dx = vec![0.0; inp];
        for (row, &d) in self.data.chunks_exact(inp).zip(dy) {
            if d == 0.0 {
                continue;
            }
            for (dxj, w) in dx.iter_mut().zip(row) {
                *dxj += w * d;
            }
        }
        dx
    }

    /// Accumulate the weight gradient of `matvec`: dy (outer) x.
    pub fn matvec_accumulate_grad(&mut self, x: &[f64], dy: &[f64]) {
        let inp = self.shape[1];
        self.ensure_grad();
        for (row, &d) in self.grad.chunks_exact_mut(inp).zip(dy) {
            if d == 0.0 {
                continue;
            }
            for (g, xv) in row.iter_mut().zip(x) {
                *g += d * xv;
            }
        }
    }
}
