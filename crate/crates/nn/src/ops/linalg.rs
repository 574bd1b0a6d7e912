use super::standard;
use crate::tensor::{Arr, Op, Tensor};
use ndarray::{Array2, Array3, ArrayView2, Axis, Ix2, Ix3};
use rayon::prelude::*;

fn as2(a: &Arr) -> ArrayView2<'_, f64> {
    a.view().into_dimensionality::<Ix2>().expect("expected 2-d tensor")
}

struct MatMul;

impl Op for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }
    fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let a = parents[0].data();
        let b = parents[1].data();
        let g = as2(grad);
        let ga = parents[0]
            .needs_grad()
            .then(|| g.dot(&as2(&b).t()).into_dyn());
        let gb = parents[1]
            .needs_grad()
            .then(|| as2(&a).t().dot(&g).into_dyn());
        vec![ga, gb]
    }
}

/// 2-d matrix product `a (n,k) @ b (k,m)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let data = as2(&a.data()).dot(&as2(&b.data())).into_dyn();
    Tensor::from_op(data, vec![a.clone(), b.clone()], Box::new(MatMul))
}

fn as3(a: &Arr) -> ndarray::ArrayView3<'_, f64> {
    a.view().into_dimensionality::<Ix3>().expect("expected 3-d tensor")
}

fn bmm_raw(a: &Arr, b: &Arr) -> Array3<f64> {
    let a3 = as3(a);
    let b3 = as3(b);
    let (bs, n, _k) = a3.dim();
    let m = b3.dim().2;
    let mut out = Array3::<f64>::zeros((bs, n, m));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut o)| {
            let prod: Array2<f64> = a3.index_axis(Axis(0), i).dot(&b3.index_axis(Axis(0), i));
            o.assign(&prod);
        });
    out
}

struct Bmm;

impl Op for Bmm {
    fn name(&self) -> &'static str {
        "bmm"
    }
    fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let a = parents[0].data();
        let b = parents[1].data();
        let ga = parents[0].needs_grad().then(|| {
            let bt = standard(&{
                let mut v = b.view();
                v.swap_axes(1, 2);
                v.to_owned()
            });
            bmm_raw(grad, &bt).into_dyn()
        });
        let gb = parents[1].needs_grad().then(|| {
            let at = standard(&{
                let mut v = a.view();
                v.swap_axes(1, 2);
                v.to_owned()
            });
            bmm_raw(&at, grad).into_dyn()
        });
        vec![ga, gb]
    }
}

/// Batched matrix product `a (B,n,k) @ b (B,k,m)`.
pub fn bmm(a: &Tensor, b: &Tensor) -> Tensor {
    let data = bmm_raw(&a.data(), &b.data()).into_dyn();
    Tensor::from_op(data, vec![a.clone(), b.clone()], Box::new(Bmm))
}
