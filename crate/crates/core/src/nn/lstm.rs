//! Single LSTM cell with explicit backward-through-time support.

use serde::{Deserialize, Serialize};

use crate::nn::ops::sigmoid;
use crate::nn::tensor::Tensor;
use crate::rng::Rng;

/// Standard LSTM gate weights. Gate order inside the stacked tensors is
/// input, forget, candidate, output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurrentCell {
    pub w_input: Tensor,  // [4H, I]
    pub w_hidden: Tensor, // [4H, H]
    pub bias: Tensor,     // [4H]
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-nonlinearity gates, stacked [i, f, g, o].
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl RecurrentCell {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut cell = RecurrentCell {
            w_input: Tensor::xavier(&[4 * hidden, input_dim], rng),
            w_hidden: Tensor::xavier(&[4 * hidden, hidden], rng),
            bias: Tensor::zeros(&[4 * hidden]),
        };
        // Forget-gate bias starts at 1 so early training retains state.
        for b in &mut cell.bias.data[hidden..2 * hidden] {
            *b = 1.0;
        }
        cell
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.shape[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.shape[1]
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmCache {
        let hidden = self.hidden_dim();
        debug_assert_eq!(x.len(), self.input_dim(), "lstm input width");
        debug_assert_eq!(h_prev.len(), hidden);
        debug_assert_eq!(c_prev.len(), hidden);
        let mut z = self.w_input.matvec(x);
        let zh = self.w_hidden.matvec(h_prev);
        for ((zv, zhv), b) in z.iter_mut().zip(&zh).zip(&self.bias.data) {
            *zv += zhv + b;
        }
        let mut gates = vec![0.0; 4 * hidden];
        for k in 0..hidden {
            gates[k] = sigmoid(z[k]); // input
            gates[hidden + k] = sigmoid(z[hidden + k]); // forget
            gates[2 * hidden + k] = z[2 * hidden + k].tanh(); // candidate
            gates[3 * hidden + k] = sigmoid(z[3 * hidden + k]); // output
        }
        let mut c = vec![0.0; hidden];
        let mut tanh_c = vec![0.0; hidden];
        let mut h = vec![0.0; hidden];
        for k in 0..hidden {
            c[k] = gates[hidden + k] * c_prev[k] + gates[k] * gates[2 * hidden + k];
            tanh_c[k] = c[k].tanh();
            h[k] = gates[3 * hidden + k] * tanh_c[k];
        }
        LstmCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
            h,
        }
    }

    /// Backward one step: accumulates weight gradients and returns
    /// (dx, dh_prev, dc_prev).
    pub fn backward(
        &mut self,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hidden = self.hidden_dim();
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hidden];
        let mut dc_prev = vec![0.0; hidden];
        for k in 0..hidden {
            let i = g[k];
            let f = g[hidden + k];
            let cand = g[2 * hidden + k];
            let o = g[3 * hidden + k];
            let tc = cache.tanh_c[k];
            let dc_total = dc[k] + dh[k] * o * (1.0 - tc * tc);
            let do_ = dh[k] * tc;
            let di = dc_total * cand;
            let df = dc_total * cache.c_prev[k];
            let dg = dc_total * i;
            dc_prev[k] = dc_total * f;
            dz[k] = di * i * (1.0 - i);
            dz[hidden + k] = df * f * (1.0 - f);
            dz[2 * hidden + k] = dg * (1.0 - cand * cand);
            dz[3 * hidden + k] = do_ * o * (1.0 - o);
        }
        self.w_input.matvec_accumulate_grad(&cache.x, &dz);
        self.w_hidden.matvec_accumulate_grad(&cache.h_prev, &dz);
        self.bias.ensure_grad();
        for (b, d) in self.bias.grad.iter_mut().zip(&dz) {
            *b += d;
        }
        let dx = self.w_input.matvec_backward_input(&dz);
        let dh_prev = self.w_hidden.matvec_backward_input(&dz);
        (dx, dh_prev, dc_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_hidden() {
        let mut cell = RecurrentCell::new(3, 2, &mut Rng::new(1));
        cell.w_input.data.iter_mut().for_each(|v| *v = 0.0);
        cell.w_hidden.data.iter_mut().for_each(|v| *v = 0.0);
        cell.bias.data.iter_mut().for_each(|v| *v = 0.0);
        let cache = cell.step(&[1.0, -2.0, 0.5], &[0.0, 0.0], &[0.0, 0.0]);
        // candidate = tanh(0) = 0, so c = 0 and h = 0.
        assert_eq!(cache.h, vec![0.0, 0.0]);
        assert_eq!(cache.c, vec![0.0, 0.0]);
    }

    #[test]
    fn hidden_stays_in_unit_interval() {
        let mut rng = Rng::new(2);
        let cell = RecurrentCell::new(4, 3, &mut rng);
        let mut h = vec![0.0; 3];
        let mut c = vec![0.0; 3];
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.range(-5.0, 5.0)).collect();
            let cache = cell.step(&x, &h, &c);
            h = cache.h;
            c = cache.c;
            for v in &h {
                assert!(v.abs() < 1.0, "h out of (-1,1): {v}");
            }
        }
    }

    #[test]
    fn step_matches_hand_unrolled_gates() {
        // 1-d cell with hand-set weights; compare against scalar arithmetic.
        let mut cell = RecurrentCell::new(1, 1, &mut Rng::new(3));
        cell.w_input.data = vec![0.5, -0.25, 1.0, 0.75]; // i f g o rows
        cell.w_hidden.data = vec![0.1, 0.2, -0.3, 0.4];
        cell.bias.data = vec![0.05, -0.1, 0.15, -0.2];
        let (x, h0, c0) = (0.8, 0.3, -0.4);
        let cache = cell.step(&[x], &[h0], &[c0]);

        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = s(0.5 * x + 0.1 * h0 + 0.05);
        let f = s(-0.25 * x + 0.2 * h0 - 0.1);
        let g = (1.0 * x - 0.3 * h0 + 0.15).tanh();
        let o = s(0.75 * x + 0.4 * h0 - 0.2);
        let c1 = f * c0 + i * g;
        let h1 = o * c1.tanh();
        assert!((cache.c[0] - c1).abs() < 1e-12);
        assert!((cache.h[0] - h1).abs() < 1e-12);
    }
}
