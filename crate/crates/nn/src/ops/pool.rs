use crate::tensor::{Arr, Op, Tensor};
use ndarray::{Ix3, Ix4, IxDyn};

/// Max pooling over the last two axes of `(B,C,H,W)`. Window positions that
/// extend past the input (when `pad > 0`) simply see fewer candidates.
pub fn max_pool2d(x: &Tensor, kernel: (usize, usize), stride: (usize, usize), pad: (usize, usize)) -> Tensor {
    struct MaxPool2d {
        input_shape: Vec<usize>,
        argmax: Vec<u32>,
    }
    impl Op for MaxPool2d {
        fn name(&self) -> &'static str {
            "max_pool2d"
        }
        fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let mut gx = Arr::zeros(IxDyn(&self.input_shape));
            let plane = self.input_shape[2] * self.input_shape[3];
            let gxs = gx.as_slice_mut().unwrap();
            let gs = grad.as_slice().expect("pool grad contiguous");
            let out_plane = gs.len() / (self.input_shape[0] * self.input_shape[1]);
            for (bc, chunk) in gs.chunks(out_plane).enumerate() {
                let base = bc * plane;
                let idx = &self.argmax[bc * out_plane..(bc + 1) * out_plane];
                for (g, &i) in chunk.iter().zip(idx) {
                    gxs[base + i as usize] += *g;
                }
            }
            vec![Some(gx)]
        }
    }

    let (b, c, h, w) = {
        let d = x.data();
        d.view().into_dimensionality::<Ix4>().expect("max_pool2d input must be 4-d").dim()
    };
    let (kh, kw) = kernel;
    let (sh, sw) = stride;
    let (ph, pw) = pad;
    let oh = (h + 2 * ph - kh) / sh + 1;
    let ow = (w + 2 * pw - kw) / sw + 1;
    let mut out = ndarray::Array4::<f64>::zeros((b, c, oh, ow));
    let mut argmax = vec![0u32; b * c * oh * ow];
    {
        let d = x.data();
        let xs = d.as_slice().expect("pool input contiguous");
        let os = out.as_slice_mut().unwrap();
        for bc in 0..b * c {
            let x_base = bc * h * w;
            let o_base = bc * oh * ow;
            for oi in 0..oh {
                for oj in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0u32;
                    for ki in 0..kh {
                        let hi = (oi * sh + ki) as isize - ph as isize;
                        if hi < 0 || hi >= h as isize {
                            continue;
                        }
                        for kj in 0..kw {
                            let wi = (oj * sw + kj) as isize - pw as isize;
                            if wi < 0 || wi >= w as isize {
                                continue;
                            }
                            let idx = hi as usize * w + wi as usize;
                            let v = xs[x_base + idx];
                            if v > best {
                                best = v;
                                best_idx = idx as u32;
                            }
                        }
                    }
                    os[o_base + oi * ow + oj] = best;
                    argmax[o_base + oi * ow + oj] = best_idx;
                }
            }
        }
    }
    Tensor::from_op(
        out.into_dyn(),
        vec![x.clone()],
        Box::new(MaxPool2d { input_shape: vec![b, c, h, w], argmax }),
    )
}

/// Max pooling over the last axis of `(B,C,L)`.
pub fn max_pool1d(x: &Tensor, kernel: usize, stride: usize) -> Tensor {
    struct MaxPool1d {
        input_shape: Vec<usize>,
        argmax: Vec<u32>,
    }
    impl Op for MaxPool1d {
        fn name(&self) -> &'static str {
            "max_pool1d"
        }
        fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let mut gx = Arr::zeros(IxDyn(&self.input_shape));
            let l = self.input_shape[2];
            let gxs = gx.as_slice_mut().unwrap();
            let gs = grad.as_slice().expect("pool grad contiguous");
            let out_l = gs.len() / (self.input_shape[0] * self.input_shape[1]);
            for (bc, chunk) in gs.chunks(out_l).enumerate() {
                let base = bc * l;
                let idx = &self.argmax[bc * out_l..(bc + 1) * out_l];
                for (g, &i) in chunk.iter().zip(idx) {
                    gxs[base + i as usize] += *g;
                }
            }
            vec![Some(gx)]
        }
    }

    let (b, c, l) = {
        let d = x.data();
        d.view().into_dimensionality::<Ix3>().expect("max_pool1d input must be 3-d").dim()
    };
    assert!(l >= kernel, "max_pool1d input shorter than kernel");
    let ol = (l - kernel) / stride + 1;
    let mut out = ndarray::Array3::<f64>::zeros((b, c, ol));
    let mut argmax = vec![0u32; b * c * ol];
    {
        let d = x.data();
        let xs = d.as_slice().expect("pool input contiguous");
        let os = out.as_slice_mut().unwrap();
        for bc in 0..b * c {
            let x_base = bc * l;
            let o_base = bc * ol;
            for oi in 0..ol {
                let start = oi * stride;
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0u32;
                for ki in 0..kernel {
                    let v = xs[x_base + start + ki];
                    if v > best {
                        best = v;
                        best_idx = (start + ki) as u32;
                    }
                }
                os[o_base + oi] = best;
                argmax[o_base + oi] = best_idx;
            }
        }
    }
    Tensor::from_op(
        out.into_dyn(),
        vec![x.clone()],
        Box::new(MaxPool1d { input_shape: vec![b, c, l], argmax }),
    )
}
