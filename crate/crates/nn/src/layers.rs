//! Parameterized building blocks shared by the detector architectures.
//!
//! Every layer exposes `collect(prefix, out)` so models can enumerate their
//! state as `(name, tensor)` pairs for checkpointing; tensors flagged
//! trainable are exactly the optimizer targets.

use crate::init;
use crate::ops;
use crate::tensor::{Arr, Tensor};
use rand_chacha::ChaCha8Rng;

pub type State = Vec<(String, Tensor)>;

fn name(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}

/// Affine map on the last axis: `(..., in) -> (..., out)`.
pub struct Linear {
    pub w: Tensor, // (in, out)
    pub b: Tensor, // (out,)
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            w: Tensor::param(init::fan_in_uniform(rng, &[in_dim, out_dim], in_dim)),
            b: Tensor::param(init::zeros(&[out_dim])),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let shape = x.shape();
        let (in_dim, out_dim) = {
            let w = self.w.shape();
            (w[0], w[1])
        };
        let rows: usize = shape[..shape.len() - 1].iter().product();
        debug_assert_eq!(shape[shape.len() - 1], in_dim);
        let flat = ops::reshape(x, &[rows, in_dim]);
        let y = ops::add(&ops::matmul(&flat, &self.w), &self.b);
        let mut out_shape = shape[..shape.len() - 1].to_vec();
        out_shape.push(out_dim);
        ops::reshape(&y, &out_shape)
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        out.push((name(prefix, "w"), self.w.clone()));
        out.push((name(prefix, "b"), self.b.clone()));
    }
}

pub struct Conv2dLayer {
    pub w: Tensor, // (out, in, kh, kw)
    pub b: Tensor, // (out,)
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub dilation: (usize, usize),
}

impl Conv2dLayer {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
        dilation: (usize, usize),
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_ch * kernel.0 * kernel.1;
        Conv2dLayer {
            w: Tensor::param(init::fan_in_uniform(
                rng,
                &[out_ch, in_ch, kernel.0, kernel.1],
                fan_in,
            )),
            b: Tensor::param(init::zeros(&[out_ch])),
            stride,
            pad,
            dilation,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let y = ops::conv2d(x, &self.w, self.stride, self.pad, self.dilation);
        let out_ch = self.b.shape()[0];
        let bias = ops::reshape(&self.b, &[1, out_ch, 1, 1]);
        ops::add(&y, &bias)
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        out.push((name(prefix, "w"), self.w.clone()));
        out.push((name(prefix, "b"), self.b.clone()));
    }
}

pub struct Conv1dLayer {
    pub w: Tensor, // (out, in/groups, k)
    pub b: Tensor,
    pub stride: usize,
    pub pad: usize,
    pub dilation: usize,
    pub groups: usize,
}

impl Conv1dLayer {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        dilation: usize,
        groups: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_ch / groups * kernel;
        Conv1dLayer {
            w: Tensor::param(init::fan_in_uniform(
                rng,
                &[out_ch, in_ch / groups, kernel],
                fan_in,
            )),
            b: Tensor::param(init::zeros(&[out_ch])),
            stride,
            pad,
            dilation,
            groups,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let y = ops::conv1d(x, &self.w, self.stride, self.pad, self.dilation, self.groups);
        let out_ch = self.b.shape()[0];
        let bias = ops::reshape(&self.b, &[1, out_ch, 1]);
        ops::add(&y, &bias)
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        out.push((name(prefix, "w"), self.w.clone()));
        out.push((name(prefix, "b"), self.b.clone()));
    }
}

/// Batch normalization over `(B, C, ...)`: statistics are taken over every
/// axis except the channel axis (axis 1).
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor, // non-trainable buffer
    pub running_var: Tensor,  // non-trainable buffer
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Tensor::param(init::full(&[channels], 1.0)),
            beta: Tensor::param(init::zeros(&[channels])),
            running_mean: Tensor::constant(init::zeros(&[channels])),
            running_var: Tensor::constant(init::full(&[channels], 1.0)),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    fn stat_shape(&self, ndim: usize) -> Vec<usize> {
        let c = self.gamma.shape()[0];
        let mut s = vec![1; ndim];
        s[1] = c;
        s
    }

    pub fn forward(&self, x: &Tensor, training: bool) -> Tensor {
        let ndim = x.shape().len();
        let reduce_axes: Vec<usize> = (0..ndim).filter(|&a| a != 1).collect();
        let stat_shape = self.stat_shape(ndim);
        let (mean, var) = if training {
            let mean = ops::mean_axes(x, &reduce_axes, true);
            let centered = ops::sub(x, &mean);
            let var = ops::mean_axes(&ops::square(&centered), &reduce_axes, true);
            // Track running statistics outside the graph.
            {
                let m = mean.data().iter().cloned().collect::<Vec<f64>>();
                let v = var.data().iter().cloned().collect::<Vec<f64>>();
                let mut rm = self.running_mean.data().clone();
                let mut rv = self.running_var.data().clone();
                for (slot, new) in rm.iter_mut().zip(&m) {
                    *slot = (1.0 - self.momentum) * *slot + self.momentum * new;
                }
                for (slot, new) in rv.iter_mut().zip(&v) {
                    *slot = (1.0 - self.momentum) * *slot + self.momentum * new;
                }
                self.running_mean.set_data(rm);
                self.running_var.set_data(rv);
            }
            (mean, var)
        } else {
            let reshape_buf = |t: &Tensor| {
                let arr = t
                    .data()
                    .clone()
                    .into_shape_with_order(ndarray::IxDyn(&stat_shape))
                    .unwrap();
                Tensor::constant(arr)
            };
            (reshape_buf(&self.running_mean), reshape_buf(&self.running_var))
        };
        let centered = ops::sub(x, &mean);
        let denom = ops::sqrt(&ops::add_const(&var, self.eps));
        let xhat = ops::div(&centered, &denom);
        let gamma = ops::reshape(&self.gamma, &stat_shape);
        let beta = ops::reshape(&self.beta, &stat_shape);
        ops::add(&ops::mul(&xhat, &gamma), &beta)
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        out.push((name(prefix, "gamma"), self.gamma.clone()));
        out.push((name(prefix, "beta"), self.beta.clone()));
        out.push((name(prefix, "running_mean"), self.running_mean.clone()));
        out.push((name(prefix, "running_var"), self.running_var.clone()));
    }
}

/// Layer normalization over the last axis.
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Tensor::param(init::full(&[dim], 1.0)),
            beta: Tensor::param(init::zeros(&[dim])),
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let last = x.shape().len() - 1;
        let mean = ops::mean_axes(x, &[last], true);
        let centered = ops::sub(x, &mean);
        let var = ops::mean_axes(&ops::square(&centered), &[last], true);
        let xhat = ops::div(&centered, &ops::sqrt(&ops::add_const(&var, self.eps)));
        ops::add(&ops::mul(&xhat, &self.gamma), &self.beta)
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        out.push((name(prefix, "gamma"), self.gamma.clone()));
        out.push((name(prefix, "beta"), self.beta.clone()));
    }
}

struct LstmCell {
    w_ih: Tensor, // (in, 4H)
    w_hh: Tensor, // (H, 4H)
    b: Tensor,    // (4H,)
    hidden: usize,
}

impl LstmCell {
    fn new(in_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        // Forget-gate bias starts at 1 so early training does not wash out
        // the cell state.
        let mut bias = init::zeros(&[4 * hidden]);
        for i in hidden..2 * hidden {
            bias[[i]] = 1.0;
        }
        LstmCell {
            w_ih: Tensor::param(init::uniform(rng, &[in_dim, 4 * hidden], bound)),
            w_hh: Tensor::param(init::uniform(rng, &[hidden, 4 * hidden], bound)),
            b: Tensor::param(bias),
            hidden,
        }
    }

    /// One step: returns (h, c).
    fn step(&self, xt: &Tensor, h: &Tensor, c: &Tensor) -> (Tensor, Tensor) {
        let hd = self.hidden;
        let gates = ops::add(
            &ops::add(&ops::matmul(xt, &self.w_ih), &ops::matmul(h, &self.w_hh)),
            &self.b,
        );
        let i = ops::sigmoid(&ops::narrow(&gates, 1, 0, hd));
        let f = ops::sigmoid(&ops::narrow(&gates, 1, hd, hd));
        let g = ops::tanh(&ops::narrow(&gates, 1, 2 * hd, hd));
        let o = ops::sigmoid(&ops::narrow(&gates, 1, 3 * hd, hd));
        let c_next = ops::add(&ops::mul(&f, c), &ops::mul(&i, &g));
        let h_next = ops::mul(&o, &ops::tanh(&c_next));
        (h_next, c_next)
    }

    fn collect(&self, prefix: &str, out: &mut State) {
        out.push((name(prefix, "w_ih"), self.w_ih.clone()));
        out.push((name(prefix, "w_hh"), self.w_hh.clone()));
        out.push((name(prefix, "b"), self.b.clone()));
    }
}

/// Stacked unidirectional LSTM returning the full output sequence `(B,T,H)`.
pub struct Lstm {
    cells: Vec<LstmCell>,
    hidden: usize,
}

impl Lstm {
    pub fn new(in_dim: usize, hidden: usize, layers: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut cells = Vec::with_capacity(layers);
        for l in 0..layers {
            let d = if l == 0 { in_dim } else { hidden };
            cells.push(LstmCell::new(d, hidden, rng));
        }
        Lstm { cells, hidden }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let shape = x.shape();
        let (b, t) = (shape[0], shape[1]);
        let mut seq = x.clone();
        for cell in &self.cells {
            let d = seq.shape()[2];
            let mut h = Tensor::constant(Arr::zeros(ndarray::IxDyn(&[b, self.hidden])));
            let mut c = h.clone();
            let mut outputs = Vec::with_capacity(t);
            for ti in 0..t {
                let xt = ops::reshape(&ops::narrow(&seq, 1, ti, 1), &[b, d]);
                let (h2, c2) = cell.step(&xt, &h, &c);
                h = h2;
                c = c2;
                outputs.push(ops::reshape(&h, &[b, 1, self.hidden]));
            }
            seq = ops::concat(&outputs, 1);
        }
        seq
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        for (i, cell) in self.cells.iter().enumerate() {
            cell.collect(&format!("{prefix}.l{i}"), out);
        }
    }
}

/// Single-layer bidirectional LSTM; outputs are concatenated `(B,T,2H)`.
pub struct BiLstm {
    fwd: LstmCell,
    bwd: LstmCell,
    hidden: usize,
}

impl BiLstm {
    pub fn new(in_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        BiLstm {
            fwd: LstmCell::new(in_dim, hidden, rng),
            bwd: LstmCell::new(in_dim, hidden, rng),
            hidden,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let shape = x.shape();
        let (b, t, d) = (shape[0], shape[1], shape[2]);
        let run = |cell: &LstmCell, reverse: bool| -> Vec<Tensor> {
            let mut h = Tensor::constant(Arr::zeros(ndarray::IxDyn(&[b, self.hidden])));
            let mut c = h.clone();
            let mut outs = vec![Tensor::zeros(&[0]); t];
            for step in 0..t {
                let ti = if reverse { t - 1 - step } else { step };
                let xt = ops::reshape(&ops::narrow(x, 1, ti, 1), &[b, d]);
                let (h2, c2) = cell.step(&xt, &h, &c);
                h = h2;
                c = c2;
                outs[ti] = ops::reshape(&h, &[b, 1, self.hidden]);
            }
            outs
        };
        let f = run(&self.fwd, false);
        let r = run(&self.bwd, true);
        let fseq = ops::concat(&f, 1);
        let rseq = ops::concat(&r, 1);
        ops::concat(&[fseq, rseq], 2)
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        self.fwd.collect(&format!("{prefix}.fwd"), out);
        self.bwd.collect(&format!("{prefix}.bwd"), out);
    }
}

/// Single-layer GRU returning the last hidden state `(B,H)`.
pub struct Gru {
    w_ih: Tensor, // (in, 3H)
    w_hh: Tensor, // (H, 3H)
    b_ih: Tensor, // (3H,)
    b_hh: Tensor, // (3H,)
    hidden: usize,
}

impl Gru {
    pub fn new(in_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Gru {
            w_ih: Tensor::param(init::uniform(rng, &[in_dim, 3 * hidden], bound)),
            w_hh: Tensor::param(init::uniform(rng, &[hidden, 3 * hidden], bound)),
            b_ih: Tensor::param(init::zeros(&[3 * hidden])),
            b_hh: Tensor::param(init::zeros(&[3 * hidden])),
            hidden,
        }
    }

    pub fn forward_last(&self, x: &Tensor) -> Tensor {
        let shape = x.shape();
        let (b, t, d) = (shape[0], shape[1], shape[2]);
        let hd = self.hidden;
        let mut h = Tensor::constant(Arr::zeros(ndarray::IxDyn(&[b, hd])));
        for ti in 0..t {
            let xt = ops::reshape(&ops::narrow(x, 1, ti, 1), &[b, d]);
            let gi = ops::add(&ops::matmul(&xt, &self.w_ih), &self.b_ih);
            let gh = ops::add(&ops::matmul(&h, &self.w_hh), &self.b_hh);
            let r = ops::sigmoid(&ops::add(
                &ops::narrow(&gi, 1, 0, hd),
                &ops::narrow(&gh, 1, 0, hd),
            ));
            let z = ops::sigmoid(&ops::add(
                &ops::narrow(&gi, 1, hd, hd),
                &ops::narrow(&gh, 1, hd, hd),
            ));
            let n = ops::tanh(&ops::add(
                &ops::narrow(&gi, 1, 2 * hd, hd),
                &ops::mul(&r, &ops::narrow(&gh, 1, 2 * hd, hd)),
            ));
            // h' = (1 - z) * n + z * h
            let one_minus_z = ops::add_const(&ops::neg(&z), 1.0);
            h = ops::add(&ops::mul(&one_minus_z, &n), &ops::mul(&z, &h));
        }
        h
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        out.push((name(prefix, "w_ih"), self.w_ih.clone()));
        out.push((name(prefix, "w_hh"), self.w_hh.clone()));
        out.push((name(prefix, "b_ih"), self.b_ih.clone()));
        out.push((name(prefix, "b_hh"), self.b_hh.clone()));
    }
}

/// Multi-head self-attention over `(B,T,D)`.
pub struct MultiHeadSelfAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
}

impl MultiHeadSelfAttention {
    pub fn new(dim: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(dim % heads, 0);
        MultiHeadSelfAttention {
            wq: Linear::new(dim, dim, rng),
            wk: Linear::new(dim, dim, rng),
            wv: Linear::new(dim, dim, rng),
            wo: Linear::new(dim, dim, rng),
            heads,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let shape = x.shape();
        let (b, t, d) = (shape[0], shape[1], shape[2]);
        let dh = d / self.heads;
        let split = |y: &Tensor| -> Tensor {
            // (B,T,D) -> (B*h, T, dh)
            let y = ops::reshape(y, &[b, t, self.heads, dh]);
            let y = ops::swap_axes(&y, 1, 2);
            ops::reshape(&y, &[b * self.heads, t, dh])
        };
        let q = split(&self.wq.forward(x));
        let k = split(&self.wk.forward(x));
        let v = split(&self.wv.forward(x));
        let kt = ops::swap_axes(&k, 1, 2);
        let scores = ops::scale(&ops::bmm(&q, &kt), 1.0 / (dh as f64).sqrt());
        let att = ops::softmax(&scores, 2);
        let ctx = ops::bmm(&att, &v);
        let ctx = ops::reshape(&ctx, &[b, self.heads, t, dh]);
        let ctx = ops::swap_axes(&ctx, 1, 2);
        let ctx = ops::reshape(&ctx, &[b, t, d]);
        self.wo.forward(&ctx)
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        self.wq.collect(&format!("{prefix}.wq"), out);
        self.wk.collect(&format!("{prefix}.wk"), out);
        self.wv.collect(&format!("{prefix}.wv"), out);
        self.wo.collect(&format!("{prefix}.wo"), out);
    }
}

/// Additive single-head attention pooling: `(B,T,D) -> (B,D)`.
pub struct AttentionPool {
    pub proj: Linear,
    pub score: Linear,
}

impl AttentionPool {
    pub fn new(dim: usize, attn_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        AttentionPool {
            proj: Linear::new(dim, attn_dim, rng),
            score: Linear::new(attn_dim, 1, rng),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let shape = x.shape();
        let (b, t) = (shape[0], shape[1]);
        let scores = self.score.forward(&ops::tanh(&self.proj.forward(x))); // (B,T,1)
        let weights = ops::softmax(&ops::reshape(&scores, &[b, t]), 1);
        let weights = ops::reshape(&weights, &[b, t, 1]);
        ops::sum_axes(&ops::mul(x, &weights), &[1], false)
    }

    pub fn collect(&self, prefix: &str, out: &mut State) {
        self.proj.collect(&format!("{prefix}.proj"), out);
        self.score.collect(&format!("{prefix}.score"), out);
    }
}
