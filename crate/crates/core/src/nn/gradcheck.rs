//! Finite-difference verification of the explicit backward passes.

use std::collections::BTreeMap;

use crate::nn::ops::NnError;
use crate::nn::tensor::Tensor;
use crate::nn::Parameters;

#[derive(Debug)]
pub struct GradCheckReport {
    /// max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    pub max_rel_error: f64,
    /// Worst relative error per parameter group.
    pub per_group: Vec<(String, f64)>,
    pub coordinates_checked: usize,
}

fn perturb<P: Parameters>(params: &mut P, name: &str, index: usize, delta: f64) {
    params.visit_mut(&mut |n: &str, t: &mut Tensor| {
        if n == name {
            t.data[index] += delta;
        }
    });
}

/// Compare backward gradients against central finite differences.
///
/// `grad_fn` must run the full forward and backward, accumulating gradients
/// into the parameter tensors and returning the loss; `loss_fn` must evaluate
/// the same deterministic computation (noise off) without touching gradients.
pub fn grad_check<P, L, G>(
    params: &mut P,
    mut loss_fn: L,
    mut grad_fn: G,
    eps: f64,
) -> Result<GradCheckReport, NnError>
where
    P: Parameters,
    L: FnMut(&mut P) -> Result<f64, NnError>,
    G: FnMut(&mut P) -> Result<f64, NnError>,
{
    params.visit_mut(&mut |_, t: &mut Tensor| {
        t.ensure_grad();
        t.zero_grad();
    });
    let base_loss = grad_fn(params)?;
    if !base_loss.is_finite() {
        return Err(NnError::NonFinite("grad_check loss"));
    }

    let mut analytic: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    params.visit(&mut |n: &str, t: &Tensor| {
        analytic.insert(n.to_string(), t.grad.clone());
    });

    let names: Vec<(String, usize)> = analytic.iter().map(|(n, g)| (n.clone(), g.len())).collect();
    let mut max_rel = 0.0f64;
    let mut per_group = Vec::new();
    let mut checked = 0usize;
    for (name, len) in names {
        let mut group_worst = 0.0f64;
        let grads = analytic[&name].clone();
        for (k, &a) in grads.iter().enumerate().take(len) {
            perturb(params, &name, k, eps);
            let lp = loss_fn(params)?;
            perturb(params, &name, k, -2.0 * eps);
            let lm = loss_fn(params)?;
            perturb(params, &name, k, eps);
            if !lp.is_finite() || !lm.is_finite() {
                return Err(NnError::NonFinite("grad_check finite difference"));
            }
            let numeric = (lp - lm) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            group_worst = group_worst.max(rel);
            checked += 1;
        }
        max_rel = max_rel.max(group_worst);
        per_group.push((name, group_worst));
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        per_group,
        coordinates_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quad {
        w: Tensor,
    }

    impl Parameters for Quad {
        fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
            f("w", &self.w);
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
            f("w", &mut self.w);
        }
    }

    #[test]
    fn linear_function_checks_to_machine_precision() {
        // f(w) = 3 w0 - 2 w1; gradient is constant.
        let mut q = Quad {
            w: Tensor::zeros(&[2]),
        };
        q.w.data = vec![0.4, -1.1];
        let loss = |p: &mut Quad| Ok(3.0 * p.w.data[0] - 2.0 * p.w.data[1]);
        let grad = |p: &mut Quad| {
            p.w.grad[0] += 3.0;
            p.w.grad[1] += -2.0;
            Ok(3.0 * p.w.data[0] - 2.0 * p.w.data[1])
        };
        let report = grad_check(&mut q, loss, grad, 1e-4).unwrap();
        assert!(report.max_rel_error < 1e-8, "{}", report.max_rel_error);
    }

    #[test]
    fn constant_function_has_zero_both_ways() {
        let mut q = Quad {
            w: Tensor::zeros(&[3]),
        };
        let loss = |_: &mut Quad| Ok(7.5);
        let grad = |_: &mut Quad| Ok(7.5);
        let report = grad_check(&mut q, loss, grad, 1e-4).unwrap();
        assert_eq!(report.max_rel_error, 0.0);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let mut q = Quad {
            w: Tensor::zeros(&[1]),
        };
        q.w.data = vec![2.0];
        let loss = |p: &mut Quad| Ok(p.w.data[0] * p.w.data[0]);
        let grad = |p: &mut Quad| {
            p.w.grad[0] += 1.0; // deliberately wrong; true gradient is 2w = 4
            Ok(p.w.data[0] * p.w.data[0])
        };
        let report = grad_check(&mut q, loss, grad, 1e-4).unwrap();
        assert!(report.max_rel_error > 0.5);
    }
}
