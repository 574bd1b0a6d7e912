//! Differentiable operations.
//!
//! Broadcasting follows the numpy right-alignment rule and is only supported
//! on the right-hand operand: the rhs shape must be expandable to the lhs
//! shape. Gradients for broadcast operands are reduced back by summation.

mod conv;
mod elementwise;
mod linalg;
mod pool;
mod reduce;
mod shape;
mod softmax;

pub use conv::{conv1d, conv2d};
pub use elementwise::{
    abs, add, add_const, div, elu, exp, leaky_relu, ln, max2, mul, neg, relu, scale, sigmoid,
    sqrt, square, sub, tanh,
};
pub use linalg::{bmm, matmul};
pub use pool::{max_pool1d, max_pool2d};
pub use reduce::{mean_all, mean_axes, sum_all, sum_axes};
pub use shape::{concat, narrow, reshape, select_columns, swap_axes};
pub use softmax::{log_softmax, softmax};

use crate::tensor::Arr;
use ndarray::{Axis, IxDyn};

/// Broadcast `a` to `shape` (right-aligned, numpy rules).
pub(crate) fn broadcast_to(a: &Arr, shape: &[usize]) -> Arr {
    a.broadcast(IxDyn(shape))
        .unwrap_or_else(|| panic!("cannot broadcast {:?} to {:?}", a.shape(), shape))
        .to_owned()
}

/// Sum `g` down to `shape`, undoing a broadcast.
pub(crate) fn reduce_to(g: &Arr, shape: &[usize]) -> Arr {
    let mut out = g.clone();
    while out.ndim() > shape.len() {
        out = out.sum_axis(Axis(0));
    }
    for ax in 0..shape.len() {
        if out.shape()[ax] != shape[ax] {
            debug_assert_eq!(shape[ax], 1, "reduce_to: incompatible shapes");
            out = out.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
    }
    out
}

/// Contiguous row-major copy.
pub(crate) fn standard(a: &Arr) -> Arr {
    a.as_standard_layout().into_owned()
}
