//! Minimal differentiable-computation kernel: dense layers, an LSTM cell,
//! softmax-family sampling, losses, Adam and gradient verification.
//!
//! Gradients are explicit per-layer backward functions over cached forward
//! intermediates; the fixed network shape makes that both fast and easy to
//! verify with finite differences.

pub mod adam;
pub mod dense;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod tensor;

pub use adam::AdamState;
pub use dense::{Activation, DenseCache, DenseLayer};
pub use gradcheck::{grad_check, GradCheckReport};
pub use lstm::{LstmCache, RecurrentCell};
pub use ops::{
    bce_backward, bce_loss, gumbel_softmax, gumbel_softmax_backward, prelu, prelu_backward,
    sigmoid, sigmoid_backward, sigmoid_vec, softmax, softmax_backward, NnError, BCE_EPS,
};
pub use tensor::Tensor;

/// Anything holding named trainable tensors: the optimizer, checkpointing and
/// the gradient checker all iterate parameters through this.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    fn zero_grads(&mut self) {
        self.visit_mut(&mut |_, t: &mut Tensor| {
            t.ensure_grad();
            t.zero_grad();
        });
    }

    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t: &Tensor| n += t.len());
        n
    }
}

/// Visit helpers for layers composed of several tensors.
pub(crate) fn visit_dense(name: &str, layer: &DenseLayer, f: &mut dyn FnMut(&str, &Tensor)) {
    f(&format!("{name}.weight"), &layer.weight);
    f(&format!("{name}.bias"), &layer.bias);
}

pub(crate) fn visit_dense_mut(
    name: &str,
    layer: &mut DenseLayer,
    f: &mut dyn FnMut(&str, &mut Tensor),
) {
    f(&format!("{name}.weight"), &mut layer.weight);
    f(&format!("{name}.bias"), &mut layer.bias);
}

pub(crate) fn visit_lstm(name: &str, cell: &RecurrentCell, f: &mut dyn FnMut(&str, &Tensor)) {
    f(&format!("{name}.w_input"), &cell.w_input);
    f(&format!("{name}.w_hidden"), &cell.w_hidden);
    f(&format!("{name}.bias"), &cell.bias);
}

pub(crate) fn visit_lstm_mut(
    name: &str,
    cell: &mut RecurrentCell,
    f: &mut dyn FnMut(&str, &mut Tensor),
) {
    f(&format!("{name}.w_input"), &mut cell.w_input);
    f(&format!("{name}.w_hidden"), &mut cell.w_hidden);
    f(&format!("{name}.bias"), &mut cell.bias);
}
