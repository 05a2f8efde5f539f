//! Elementwise activations, softmax-family ops and the training loss, each
//! with an explicit backward companion.

use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// PReLU with a fixed negative slope: max(x,0) + slope * min(x,0).
pub fn prelu(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| if v >= 0.0 { v } else { slope * v })
        .collect()
}

pub fn prelu_backward(x: &[f64], slope: f64, dy: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| if v >= 0.0 { d } else { slope * d })
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sigmoid_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| sigmoid(v)).collect()
}

/// Backward through sigmoid given its output y.
pub fn sigmoid_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter().zip(dy).map(|(&o, &d)| d * o * (1.0 - o)).collect()
}

/// Max-shifted softmax; entries are positive and sum to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    assert!(!logits.is_empty(), "softmax of empty vector");
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Backward through softmax given its output y: dz_i = y_i (dy_i - sum_j dy_j y_j).
pub fn softmax_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    y.iter().zip(dy).map(|(&yi, &di)| yi * (di - dot)).collect()
}

/// Gumbel-softmax: softmax((logits + g) / tau), g ~ Gumbel(0,1) when a noise
/// source is supplied, g = 0 otherwise. The output is differentiable in the
/// logits; backward is the softmax backward scaled by 1/tau.
pub fn gumbel_softmax(
    logits: &[f64],
    tau: f64,
    noise: Option<&mut Rng>,
) -> Result<Vec<f64>, NnError> {
    if tau <= 0.0 {
        return Err(NnError::BadTemperature(tau));
    }
    let mut shifted: Vec<f64> = logits.to_vec();
    if let Some(rng) = noise {
        for v in &mut shifted {
            *v += rng.gumbel();
        }
    }
    for v in &mut shifted {
        *v /= tau;
    }
    Ok(softmax(&shifted))
}

pub fn gumbel_softmax_backward(y: &[f64], dy: &[f64], tau: f64) -> Vec<f64> {
    softmax_backward(y, dy)
        .into_iter()
        .map(|d| d / tau)
        .collect()
}

pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy with predictions clamped to [eps, 1-eps].
pub fn bce_loss(pred: &[f64], target: &[f64]) -> Result<f64, NnError> {
    if pred.len() != target.len() {
        return Err(NnError::ShapeMismatch(format!(
            "bce: pred {} vs target {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len().max(1) as f64;
    let mut acc = 0.0;
    for (&p, &t) in pred.iter().zip(target) {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        acc -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    let loss = acc / n;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("bce_loss"));
    }
    Ok(loss)
}

/// d(loss)/d(pred); zero where the clamp is active.
pub fn bce_backward(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let n = pred.len().max(1) as f64;
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
                0.0
            } else {
                (-t / p + (1.0 - t) / (1.0 - p)) / n
            }
        })
        .collect()
}
