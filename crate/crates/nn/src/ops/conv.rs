use super::standard;
use crate::tensor::{Arr, Op, Tensor};
use ndarray::{Array2, Array4, ArrayView2, ArrayView3, Axis, Ix3, Ix4, IxDyn};
use rayon::prelude::*;

#[derive(Clone, Copy)]
struct Conv2dGeom {
    stride: (usize, usize),
    pad: (usize, usize),
    dilation: (usize, usize),
    kernel: (usize, usize),
    in_hw: (usize, usize),
    out_hw: (usize, usize),
}

fn out_len(n: usize, k: usize, s: usize, p: usize, d: usize) -> usize {
    let eff = (k - 1) * d + 1;
    assert!(n + 2 * p >= eff, "conv input too short: len {n}, kernel {eff}, pad {p}");
    (n + 2 * p - eff) / s + 1
}

/// Valid output range along one axis for a fixed kernel tap.
fn tap_range(out_n: usize, in_n: usize, k_off: usize, stride: usize, pad: usize, dil: usize) -> (usize, usize) {
    // index = o*stride + k_off*dil - pad must lie in [0, in_n)
    let base = k_off * dil;
    let lo = if pad > base { (pad - base).div_ceil(stride) } else { 0 };
    let hi_excl = if in_n + pad > base {
        ((in_n + pad - base - 1) / stride + 1).min(out_n)
    } else {
        0
    };
    (lo.min(out_n), hi_excl)
}

fn im2col_2d(x: &ArrayView3<'_, f64>, g: &Conv2dGeom) -> Array2<f64> {
    let (c, h, w) = x.dim();
    let (kh, kw) = g.kernel;
    let (sh, sw) = g.stride;
    let (ph, pw) = g.pad;
    let (dh, dw) = g.dilation;
    let (oh, ow) = g.out_hw;
    let xs = x.as_slice().expect("im2col: non-contiguous input");
    let mut cols = Array2::<f64>::zeros((c * kh * kw, oh * ow));
    {
        let cs = cols.as_slice_mut().unwrap();
        for ci in 0..c {
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (ci * kh + ki) * kw + kj;
                    let row_base = row * oh * ow;
                    let (lo_j, hi_j) = tap_range(ow, w, kj, sw, pw, dw);
                    for oi in 0..oh {
                        let hi = (oi * sh + ki * dh) as isize - ph as isize;
                        if hi < 0 || hi >= h as isize {
                            continue;
                        }
                        let x_base = ci * h * w + hi as usize * w;
                        let o_base = row_base + oi * ow;
                        for oj in lo_j..hi_j {
                            let wi = oj * sw + kj * dw - pw;
                            cs[o_base + oj] = xs[x_base + wi];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im_2d(cols: &ArrayView2<'_, f64>, c: usize, g: &Conv2dGeom) -> ndarray::Array3<f64> {
    let (h, w) = g.in_hw;
    let (kh, kw) = g.kernel;
    let (sh, sw) = g.stride;
    let (ph, pw) = g.pad;
    let (dh, dw) = g.dilation;
    let (oh, ow) = g.out_hw;
    let cs = cols.as_slice().expect("col2im: non-contiguous cols");
    let mut x = ndarray::Array3::<f64>::zeros((c, h, w));
    {
        let xs = x.as_slice_mut().unwrap();
        for ci in 0..c {
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (ci * kh + ki) * kw + kj;
                    let row_base = row * oh * ow;
                    let (lo_j, hi_j) = tap_range(ow, w, kj, sw, pw, dw);
                    for oi in 0..oh {
                        let hi = (oi * sh + ki * dh) as isize - ph as isize;
                        if hi < 0 || hi >= h as isize {
                            continue;
                        }
                        let x_base = ci * h * w + hi as usize * w;
                        let o_base = row_base + oi * ow;
                        for oj in lo_j..hi_j {
                            let wi = oj * sw + kj * dw - pw;
                            xs[x_base + wi] += cs[o_base + oj];
                        }
                    }
                }
            }
        }
    }
    x
}

struct Conv2d {
    geom: Conv2dGeom,
}

impl Op for Conv2d {
    fn name(&self) -> &'static str {
        "conv2d"
    }
    fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let g = self.geom;
        let x = parents[0].data();
        let w = parents[1].data();
        let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
        let w4 = w.view().into_dimensionality::<Ix4>().unwrap();
        let (b, c, _, _) = x4.dim();
        let (o, _, kh, kw) = w4.dim();
        let g4 = grad.view().into_dimensionality::<Ix4>().unwrap();
        let (oh, ow) = g.out_hw;

        let gw = parents[1].needs_grad().then(|| {
            let partials: Vec<Array2<f64>> = (0..b)
                .into_par_iter()
                .map(|bi| {
                    let cols = im2col_2d(&x4.index_axis(Axis(0), bi), &g);
                    let gout = g4
                        .index_axis(Axis(0), bi)
                        .into_shape_with_order((o, oh * ow))
                        .unwrap();
                    gout.dot(&cols.t())
                })
                .collect();
            let mut acc = Array2::<f64>::zeros((o, c * kh * kw));
            for p in partials {
                acc += &p;
            }
            acc.into_shape_with_order(IxDyn(&[o, c, kh, kw])).unwrap()
        });

        let gx = parents[0].needs_grad().then(|| {
            let wmat = standard(&w)
                .into_shape_with_order((o, c * kh * kw))
                .unwrap();
            let mut gx = Array4::<f64>::zeros(x4.dim());
            gx.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(bi, mut slot)| {
                    let gout = g4
                        .index_axis(Axis(0), bi)
                        .into_shape_with_order((o, oh * ow))
                        .unwrap();
                    let dcols = wmat.t().dot(&gout);
                    slot.assign(&col2im_2d(&dcols.view(), c, &g));
                });
            gx.into_dyn()
        });

        vec![gx, gw]
    }
}

/// 2-d convolution: `x (B,C,H,W)` with `w (O,C,KH,KW)`. Bias is applied
/// separately by the layer via a broadcast add.
pub fn conv2d(
    x: &Tensor,
    w: &Tensor,
    stride: (usize, usize),
    pad: (usize, usize),
    dilation: (usize, usize),
) -> Tensor {
    let (b, c, h, win) = {
        let d = x.data();
        let v = d.view().into_dimensionality::<Ix4>().expect("conv2d input must be 4-d");
        v.dim()
    };
    let (o, wc, kh, kw) = {
        let d = w.data();
        let v = d.view().into_dimensionality::<Ix4>().expect("conv2d weight must be 4-d");
        v.dim()
    };
    assert_eq!(c, wc, "conv2d channel mismatch");
    let geom = Conv2dGeom {
        stride,
        pad,
        dilation,
        kernel: (kh, kw),
        in_hw: (h, win),
        out_hw: (
            out_len(h, kh, stride.0, pad.0, dilation.0),
            out_len(win, kw, stride.1, pad.1, dilation.1),
        ),
    };
    let (oh, ow) = geom.out_hw;
    let data = {
        let xd = x.data();
        let wd = w.data();
        let x4 = xd.view().into_dimensionality::<Ix4>().unwrap();
        let wmat = standard(&wd).into_shape_with_order((o, c * kh * kw)).unwrap();
        let mut out = Array4::<f64>::zeros((b, o, oh, ow));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(bi, mut slot)| {
                let cols = im2col_2d(&x4.index_axis(Axis(0), bi), &geom);
                let prod = wmat.dot(&cols);
                slot.assign(&prod.into_shape_with_order((o, oh, ow)).unwrap());
            });
        out.into_dyn()
    };
    Tensor::from_op(data, vec![x.clone(), w.clone()], Box::new(Conv2d { geom }))
}

#[derive(Clone, Copy)]
struct Conv1dGeom {
    stride: usize,
    pad: usize,
    dilation: usize,
    kernel: usize,
    groups: usize,
    in_len: usize,
    out_len: usize,
}

fn im2col_1d(x: &ArrayView2<'_, f64>, g: &Conv1dGeom) -> Array2<f64> {
    // x is the channel slice of one group: (Cg, L)
    let (c, l) = x.dim();
    let k = g.kernel;
    let xs = x.as_slice().expect("im2col1d: non-contiguous input");
    let mut cols = Array2::<f64>::zeros((c * k, g.out_len));
    {
        let cs = cols.as_slice_mut().unwrap();
        for ci in 0..c {
            for ki in 0..k {
                let row = ci * k + ki;
                let row_base = row * g.out_len;
                let (lo, hi) = tap_range(g.out_len, l, ki, g.stride, g.pad, g.dilation);
                let x_base = ci * l;
                for oi in lo..hi {
                    let li = oi * g.stride + ki * g.dilation - g.pad;
                    cs[row_base + oi] = xs[x_base + li];
                }
            }
        }
    }
    cols
}

fn col2im_1d(cols: &ArrayView2<'_, f64>, c: usize, g: &Conv1dGeom) -> Array2<f64> {
    let l = g.in_len;
    let k = g.kernel;
    let cs = cols.as_slice().expect("col2im1d: non-contiguous cols");
    let mut x = Array2::<f64>::zeros((c, l));
    {
        let xs = x.as_slice_mut().unwrap();
        for ci in 0..c {
            for ki in 0..k {
                let row = ci * k + ki;
                let row_base = row * g.out_len;
                let (lo, hi) = tap_range(g.out_len, l, ki, g.stride, g.pad, g.dilation);
                let x_base = ci * l;
                for oi in lo..hi {
                    let li = oi * g.stride + ki * g.dilation - g.pad;
                    xs[x_base + li] += cs[row_base + oi];
                }
            }
        }
    }
    x
}

struct Conv1d {
    geom: Conv1dGeom,
}

impl Op for Conv1d {
    fn name(&self) -> &'static str {
        "conv1d"
    }
    fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
        let g = self.geom;
        let x = parents[0].data();
        let w = parents[1].data();
        let x3 = x.view().into_dimensionality::<Ix3>().unwrap();
        let w3 = w.view().into_dimensionality::<Ix3>().unwrap();
        let (b, _c, _l) = x3.dim();
        let (o, cg, k) = w3.dim();
        let og = o / g.groups;
        let g3 = grad.view().into_dimensionality::<Ix3>().unwrap();

        let gw = parents[1].needs_grad().then(|| {
            let partials: Vec<Array2<f64>> = (0..b)
                .into_par_iter()
                .map(|bi| {
                    let xb = x3.index_axis(Axis(0), bi);
                    let gb = g3.index_axis(Axis(0), bi);
                    let mut acc = Array2::<f64>::zeros((o, cg * k));
                    for gi in 0..g.groups {
                        let xg = xb.slice(ndarray::s![gi * cg..(gi + 1) * cg, ..]);
                        let cols = im2col_1d(&xg, &g);
                        let gout = gb.slice(ndarray::s![gi * og..(gi + 1) * og, ..]);
                        let prod = gout.dot(&cols.t());
                        acc.slice_mut(ndarray::s![gi * og..(gi + 1) * og, ..]).assign(&prod);
                    }
                    acc
                })
                .collect();
            let mut acc = Array2::<f64>::zeros((o, cg * k));
            for p in partials {
                acc += &p;
            }
            acc.into_shape_with_order(IxDyn(&[o, cg, k])).unwrap()
        });

        let gx = parents[0].needs_grad().then(|| {
            let mut gx = ndarray::Array3::<f64>::zeros(x3.dim());
            let wmat = standard(&w).into_shape_with_order((o, cg * k)).unwrap();
            gx.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(bi, mut slot)| {
                    let gb = g3.index_axis(Axis(0), bi);
                    for gi in 0..g.groups {
                        let wg = wmat.slice(ndarray::s![gi * og..(gi + 1) * og, ..]);
                        let gout = gb.slice(ndarray::s![gi * og..(gi + 1) * og, ..]);
                        let dcols = wg.t().dot(&gout);
                        let xg = col2im_1d(&dcols.view(), cg, &g);
                        slot.slice_mut(ndarray::s![gi * cg..(gi + 1) * cg, ..]).assign(&xg);
                    }
                });
            gx.into_dyn()
        });

        vec![gx, gw]
    }
}

/// 1-d grouped convolution: `x (B,C,L)` with `w (O,C/groups,K)`.
pub fn conv1d(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
    dilation: usize,
    groups: usize,
) -> Tensor {
    let (b, c, l) = {
        let d = x.data();
        d.view().into_dimensionality::<Ix3>().expect("conv1d input must be 3-d").dim()
    };
    let (o, cg, k) = {
        let d = w.data();
        d.view().into_dimensionality::<Ix3>().expect("conv1d weight must be 3-d").dim()
    };
    assert_eq!(c, cg * groups, "conv1d channel/group mismatch");
    assert_eq!(o % groups, 0, "conv1d out channels not divisible by groups");
    let geom = Conv1dGeom {
        stride,
        pad,
        dilation,
        kernel: k,
        groups,
        in_len: l,
        out_len: out_len(l, k, stride, pad, dilation),
    };
    let og = o / groups;
    let data = {
        let xd = x.data();
        let wd = w.data();
        let x3 = xd.view().into_dimensionality::<Ix3>().unwrap();
        let wmat = standard(&wd).into_shape_with_order((o, cg * k)).unwrap();
        let mut out = ndarray::Array3::<f64>::zeros((b, o, geom.out_len));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(bi, mut slot)| {
                let xb = x3.index_axis(Axis(0), bi);
                for gi in 0..groups {
                    let xg = xb.slice(ndarray::s![gi * cg..(gi + 1) * cg, ..]);
                    let cols = im2col_1d(&xg, &geom);
                    let wg = wmat.slice(ndarray::s![gi * og..(gi + 1) * og, ..]);
                    let prod = wg.dot(&cols);
                    slot.slice_mut(ndarray::s![gi * og..(gi + 1) * og, ..]).assign(&prod);
                }
            });
        out.into_dyn()
    };
    Tensor::from_op(data, vec![x.clone(), w.clone()], Box::new(Conv1d { geom }))
}
