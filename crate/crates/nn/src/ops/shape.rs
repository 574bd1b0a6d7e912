use super::standard;
use crate::tensor::{Arr, Op, Tensor};
use ndarray::{Axis, IxDyn, Slice};

struct Reshape {
    input_shape: Vec<usize>,
}

impl Op for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let g = standard(grad)
            .into_shape_with_order(IxDyn(&self.input_shape))
            .expect("reshape backward");
        vec![Some(g)]
    }
}

pub fn reshape(x: &Tensor, shape: &[usize]) -> Tensor {
    let input_shape = x.shape();
    let n: usize = input_shape.iter().product();
    let m: usize = shape.iter().product();
    assert_eq!(n, m, "reshape {:?} -> {:?}", input_shape, shape);
    let data = standard(&x.data())
        .into_shape_with_order(IxDyn(shape))
        .expect("reshape forward");
    Tensor::from_op(data, vec![x.clone()], Box::new(Reshape { input_shape }))
}

struct SwapAxes {
    a: usize,
    b: usize,
}

impl Op for SwapAxes {
    fn name(&self) -> &'static str {
        "swap_axes"
    }
    fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let mut g = grad.view();
        g.swap_axes(self.a, self.b);
        vec![Some(standard(&g.to_owned()))]
    }
}

pub fn swap_axes(x: &Tensor, a: usize, b: usize) -> Tensor {
    let mut v = x.data().view().to_owned();
    v.swap_axes(a, b);
    let data = standard(&v);
    Tensor::from_op(data, vec![x.clone()], Box::new(SwapAxes { a, b }))
}

struct Concat {
    axis: usize,
    sizes: Vec<usize>,
}

impl Op for Concat {
    fn name(&self) -> &'static str {
        "concat"
    }
    fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let mut grads = Vec::with_capacity(parents.len());
        let mut start = 0usize;
        for (p, &sz) in parents.iter().zip(&self.sizes) {
            if p.needs_grad() {
                let piece = grad
                    .slice_axis(Axis(self.axis), Slice::from(start..start + sz))
                    .to_owned();
                grads.push(Some(piece));
            } else {
                grads.push(None);
            }
            start += sz;
        }
        grads
    }
}

pub fn concat(xs: &[Tensor], axis: usize) -> Tensor {
    assert!(!xs.is_empty());
    let views: Vec<_> = xs.iter().map(|t| t.node_data_view()).collect();
    let view_refs: Vec<_> = views.iter().map(|d| d.view()).collect();
    let data = ndarray::concatenate(Axis(axis), &view_refs).expect("concat shapes");
    let sizes = xs.iter().map(|t| t.shape()[axis]).collect();
    drop(views);
    Tensor::from_op(data, xs.to_vec(), Box::new(Concat { axis, sizes }))
}

struct Narrow {
    axis: usize,
    start: usize,
    input_shape: Vec<usize>,
}

impl Op for Narrow {
    fn name(&self) -> &'static str {
        "narrow"
    }
    fn backward(&self, grad: &Arr, _parents: &[Tensor], out: &Arr) -> Vec<Option<Arr>> {
        let len = out.shape()[self.axis];
        let mut g = Arr::zeros(IxDyn(&self.input_shape));
        g.slice_axis_mut(Axis(self.axis), Slice::from(self.start..self.start + len))
            .assign(grad);
        vec![Some(g)]
    }
}

/// Contiguous slice `start..start+len` along `axis`.
pub fn narrow(x: &Tensor, axis: usize, start: usize, len: usize) -> Tensor {
    let input_shape = x.shape();
    assert!(start + len <= input_shape[axis], "narrow out of bounds");
    let data = x
        .data()
        .slice_axis(Axis(axis), Slice::from(start..start + len))
        .to_owned();
    Tensor::from_op(
        standard(&data),
        vec![x.clone()],
        Box::new(Narrow { axis, start, input_shape }),
    )
}

struct SelectColumns {
    idx: Vec<usize>,
    input_shape: Vec<usize>,
}

impl Op for SelectColumns {
    fn name(&self) -> &'static str {
        "select_columns"
    }
    fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let mut g = Arr::zeros(IxDyn(&self.input_shape));
        for (row, &col) in self.idx.iter().enumerate() {
            g[[row, col]] += grad[[row]];
        }
        vec![Some(g)]
    }
}

/// For a 2-d tensor, pick one column per row: `out[i] = x[i, idx[i]]`.
pub fn select_columns(x: &Tensor, idx: &[usize]) -> Tensor {
    let input_shape = x.shape();
    assert_eq!(input_shape.len(), 2);
    assert_eq!(idx.len(), input_shape[0]);
    let data = {
        let d = x.data();
        let mut out = Vec::with_capacity(idx.len());
        for (row, &col) in idx.iter().enumerate() {
            out.push(d[[row, col]]);
        }
        Arr::from_shape_vec(IxDyn(&[idx.len()]), out).unwrap()
    };
    Tensor::from_op(
        data,
        vec![x.clone()],
        Box::new(SelectColumns { idx: idx.to_vec(), input_shape }),
    )
}

impl Tensor {
    /// Borrow of the underlying data used by concat (kept out of the public surface).
    pub(crate) fn node_data_view(&self) -> std::cell::Ref<'_, Arr> {
        self.data()
    }
}
