//! CPU tensor engine with reverse-mode autodiff, built for the spoofbench
//! detector zoo: small dependency surface, `f64` throughout, deterministic
//! for a fixed seed and thread count.

pub mod init;
pub mod layers;
pub mod ops;
pub mod optim;
mod tensor;

pub use tensor::{Arr, Op, Tensor};

use ndarray::IxDyn;

/// Mean cross-entropy of log-softmax outputs against integer class labels.
///
/// `logits` is `(B, K)`; `labels[i]` is the target class of row `i`.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Tensor {
    let logp = ops::log_softmax(logits, 1);
    let picked = ops::select_columns(&logp, labels);
    ops::neg(&ops::mean_all(&picked))
}

/// One-dimensional tensor from a slice.
pub fn tensor1(values: &[f64]) -> Tensor {
    Tensor::constant(Arr::from_shape_vec(IxDyn(&[values.len()]), values.to_vec()).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Tensor::from_vec(vec![0.0, 0.0, 0.0, 0.0], &[2, 2]);
        let loss = cross_entropy(&logits, &[0, 1]);
        assert!((loss.scalar_value() - (2.0f64).ln()).abs() < 1e-12);
    }
}
