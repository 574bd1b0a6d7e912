use super::broadcast_to;
use crate::tensor::{Arr, Op, Tensor};
use ndarray::{Axis, IxDyn};

/// Insert size-1 axes back so the gradient broadcasts against the input.
fn unsqueeze(g: &Arr, input_ndim: usize, axes: &[usize], keepdims: bool) -> Arr {
    if keepdims {
        return g.clone();
    }
    let mut out = g.clone();
    let mut sorted: Vec<usize> = axes.to_vec();
    sorted.sort_unstable();
    for &ax in &sorted {
        debug_assert!(ax < input_ndim);
        out = out.insert_axis(Axis(ax));
    }
    out
}

struct SumAxes {
    axes: Vec<usize>,
    keepdims: bool,
    input_shape: Vec<usize>,
    scale: f64,
}

impl Op for SumAxes {
    fn name(&self) -> &'static str {
        "sum_axes"
    }
    fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let g = unsqueeze(grad, self.input_shape.len(), &self.axes, self.keepdims);
        let mut full = broadcast_to(&g, &self.input_shape);
        if self.scale != 1.0 {
            full.mapv_inplace(|v| v * self.scale);
        }
        vec![Some(full)]
    }
}

fn sum_impl(x: &Tensor, axes: &[usize], keepdims: bool, mean: bool) -> Tensor {
    let input_shape = x.shape();
    let mut count = 1usize;
    for &ax in axes {
        count *= input_shape[ax];
    }
    let mut data = x.data().clone();
    let mut sorted: Vec<usize> = axes.to_vec();
    sorted.sort_unstable();
    for &ax in sorted.iter().rev() {
        data = data.sum_axis(Axis(ax));
    }
    if keepdims {
        for &ax in &sorted {
            data = data.insert_axis(Axis(ax));
        }
    }
    let scale = if mean { 1.0 / count as f64 } else { 1.0 };
    if mean {
        data.mapv_inplace(|v| v * scale);
    }
    Tensor::from_op(
        data,
        vec![x.clone()],
        Box::new(SumAxes { axes: axes.to_vec(), keepdims, input_shape, scale }),
    )
}

pub fn sum_axes(x: &Tensor, axes: &[usize], keepdims: bool) -> Tensor {
    sum_impl(x, axes, keepdims, false)
}

pub fn mean_axes(x: &Tensor, axes: &[usize], keepdims: bool) -> Tensor {
    sum_impl(x, axes, keepdims, true)
}

struct SumAll {
    input_shape: Vec<usize>,
    scale: f64,
}

impl Op for SumAll {
    fn name(&self) -> &'static str {
        "sum_all"
    }
    fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let g = grad.iter().next().copied().unwrap_or(0.0) * self.scale;
        vec![Some(Arr::from_elem(IxDyn(&self.input_shape), g))]
    }
}

/// Sum of all elements as a 0-d tensor.
pub fn sum_all(x: &Tensor) -> Tensor {
    let input_shape = x.shape();
    let s = x.data().sum();
    Tensor::from_op(
        Arr::from_elem(IxDyn(&[]), s),
        vec![x.clone()],
        Box::new(SumAll { input_shape, scale: 1.0 }),
    )
}

/// Mean of all elements as a 0-d tensor.
pub fn mean_all(x: &Tensor) -> Tensor {
    let input_shape = x.shape();
    let n = x.len() as f64;
    let s = x.data().sum() / n;
    Tensor::from_op(
        Arr::from_elem(IxDyn(&[]), s),
        vec![x.clone()],
        Box::new(SumAll { input_shape, scale: 1.0 / n }),
    )
}
