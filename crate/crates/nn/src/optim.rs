//! Adam optimizer.

use crate::tensor::{Arr, Tensor};

pub struct Adam {
    params: Vec<Tensor>,
    m: Vec<Arr>,
    v: Vec<Arr>,
    step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(params: Vec<Tensor>, lr: f64) -> Self {
        let m = params.iter().map(|p| Arr::zeros(p.data().raw_dim())).collect();
        let v = params.iter().map(|p| Arr::zeros(p.data().raw_dim())).collect();
        Adam { params, m, v, step_count: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.zero_grad();
        }
    }

    /// Apply one update from the gradients currently stored on the params.
    /// Parameters without a gradient are left untouched.
    pub fn step(&mut self) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, p) in self.params.iter().enumerate() {
            let Some(grad) = p.grad() else { continue };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut *m).and(&grad).for_each(|mv, &g| {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * g;
            });
            ndarray::Zip::from(&mut *v).and(&grad).for_each(|vv, &g| {
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * g * g;
            });
            let mut data = p.data().clone();
            ndarray::Zip::from(&mut data).and(&*m).and(&*v).for_each(|w, &mv, &vv| {
                let mhat = mv / bc1;
                let vhat = vv / bc2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            });
            p.set_data(data);
        }
    }
}
