//! Adam optimizer with bias correction and a stepwise learning-rate decay
//! schedule applied at epoch boundaries.

use std::collections::BTreeMap;

use crate::nn::tensor::Tensor;
use crate::nn::Parameters;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub epoch: usize,
    /// Multiply the learning rate by `decay_factor` every `decay_every` epochs.
    pub decay_every: usize,
    pub decay_factor: f64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            base_lr: lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            epoch: 0,
            decay_every: 50,
            decay_factor: 0.2,
            moments: BTreeMap::new(),
        }
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    /// Learning rate in effect for the current epoch.
    pub fn effective_lr(&self) -> f64 {
        let drops = self.epoch.checked_div(self.decay_every).unwrap_or(0);
        self.base_lr * self.decay_factor.powi(drops as i32)
    }

    /// One Adam update over every parameter tensor using the gradients
    /// accumulated in them. Gradients are left untouched; callers zero them.
    pub fn apply<P: Parameters>(&mut self, params: &mut P) {
        self.step += 1;
        let t = self.step as f64;
        let lr = self.effective_lr();
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let bc1 = 1.0 - b1.powf(t);
        let bc2 = 1.0 - b2.powf(t);
        let moments = &mut self.moments;
        params.visit_mut(&mut |name: &str, tensor: &mut Tensor| {
            tensor.ensure_grad();
            let entry = moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![0.0; tensor.len()], vec![0.0; tensor.len()]));
            let (m, v) = entry;
            for k in 0..tensor.len() {
                let g = tensor.grad[k];
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                tensor.data[k] -= lr * mhat / (vhat.sqrt() + eps);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    struct Single(Tensor);
    impl Parameters for Single {
        fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
            f("w", &self.0);
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
            f("w", &mut self.0);
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Single(Tensor::zeros(&[3]));
        p.0.data = vec![1.0, -2.0, 0.5];
        let before = p.0.data.clone();
        let mut adam = AdamState::new(5e-4);
        adam.apply(&mut p);
        assert_eq!(p.0.data, before);
    }

    #[test]
    fn first_step_magnitude_is_about_lr() {
        // With a constant gradient, the bias-corrected first update is
        // lr * g / (|g| + eps) = lr * sign(g) up to eps.
        let mut p = Single(Tensor::zeros(&[2]));
        p.0.grad = vec![3.0, -0.2];
        let mut adam = AdamState::new(1e-3);
        adam.apply(&mut p);
        assert!((p.0.data[0] + 1e-3).abs() < 1e-8);
        assert!((p.0.data[1] - 1e-3).abs() < 1e-8);
    }

    #[test]
    fn lr_decays_by_fifth_every_fifty_epochs() {
        let mut adam = AdamState::new(5e-4);
        assert!((adam.effective_lr() - 5e-4).abs() < 1e-18);
        adam.set_epoch(49);
        assert!((adam.effective_lr() - 5e-4).abs() < 1e-18);
        adam.set_epoch(50);
        assert!((adam.effective_lr() - 1e-4).abs() < 1e-18);
        adam.set_epoch(100);
        assert!((adam.effective_lr() - 2e-5).abs() < 1e-18);
    }
}
