//! Seeded parameter initialization.

use crate::tensor::Arr;
use ndarray::IxDyn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform in `[-bound, bound)`.
pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Arr {
    let n: usize = shape.iter().product();
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push(rng.random_range(-bound..bound));
    }
    Arr::from_shape_vec(IxDyn(shape), v).unwrap()
}

/// Fan-in scaled uniform, the default for linear and conv weights.
pub fn fan_in_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Arr {
    uniform(rng, shape, 1.0 / (fan_in as f64).sqrt())
}

pub fn zeros(shape: &[usize]) -> Arr {
    Arr::zeros(IxDyn(shape))
}

pub fn full(shape: &[usize], value: f64) -> Arr {
    Arr::from_elem(IxDyn(shape), value)
}
