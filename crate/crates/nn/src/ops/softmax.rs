use crate::tensor::{Arr, Op, Tensor};
use ndarray::Axis;

fn softmax_data(x: &Arr, axis: usize) -> Arr {
    let mut out = x.clone();
    for mut lane in out.lanes_mut(Axis(axis)) {
        let max = lane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in lane.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in lane.iter_mut() {
            *v /= sum;
        }
    }
    out
}

struct Softmax {
    axis: usize,
}

impl Op for Softmax {
    fn name(&self) -> &'static str {
        "softmax"
    }
    fn backward(&self, grad: &Arr, _parents: &[Tensor], out: &Arr) -> Vec<Option<Arr>> {
        // dx = y * (g - sum(g * y, axis))
        let mut g = grad.clone();
        for (mut glane, ylane) in g.lanes_mut(Axis(self.axis)).into_iter().zip(out.lanes(Axis(self.axis))) {
            let dot: f64 = glane.iter().zip(ylane.iter()).map(|(a, b)| a * b).sum();
            for (gv, yv) in glane.iter_mut().zip(ylane.iter()) {
                *gv = yv * (*gv - dot);
            }
        }
        vec![Some(g)]
    }
}

pub fn softmax(x: &Tensor, axis: usize) -> Tensor {
    let data = softmax_data(&x.data(), axis);
    Tensor::from_op(data, vec![x.clone()], Box::new(Softmax { axis }))
}

struct LogSoftmax {
    axis: usize,
}

impl Op for LogSoftmax {
    fn name(&self) -> &'static str {
        "log_softmax"
    }
    fn backward(&self, grad: &Arr, _parents: &[Tensor], out: &Arr) -> Vec<Option<Arr>> {
        // dx = g - softmax(x) * sum(g, axis)
        let mut g = grad.clone();
        for (mut glane, ylane) in g.lanes_mut(Axis(self.axis)).into_iter().zip(out.lanes(Axis(self.axis))) {
            let gsum: f64 = glane.iter().sum();
            for (gv, yv) in glane.iter_mut().zip(ylane.iter()) {
                *gv -= yv.exp() * gsum;
            }
        }
        vec![Some(g)]
    }
}

pub fn log_softmax(x: &Tensor, axis: usize) -> Tensor {
    let data = {
        let x = x.data();
        let mut out = x.clone();
        for mut lane in out.lanes_mut(Axis(axis)) {
            let max = lane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let logsum = lane.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            for v in lane.iter_mut() {
                *v -= logsum;
            }
        }
        out
    };
    Tensor::from_op(data, vec![x.clone()], Box::new(LogSoftmax { axis }))
}
