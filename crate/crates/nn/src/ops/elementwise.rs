use super::{broadcast_to, reduce_to};
use crate::tensor::{Arr, Op, Tensor};

/// Binary op with optional rhs broadcast; `fwd` and the two grad closures are
/// fixed per operation, so each gets a tiny struct below.
macro_rules! unary_op {
    ($name:ident, $opname:literal, $fwd:expr, $bwd:expr) => {
        pub fn $name(x: &Tensor) -> Tensor {
            struct TheOp;
            impl Op for TheOp {
                fn name(&self) -> &'static str {
                    $opname
                }
                fn backward(&self, grad: &Arr, parents: &[Tensor], out: &Arr) -> Vec<Option<Arr>> {
                    let x = parents[0].data();
                    let bwd: fn(&Arr, &Arr, &Arr) -> Arr = $bwd;
                    vec![Some(bwd(grad, &x, out))]
                }
            }
            let fwd: fn(f64) -> f64 = $fwd;
            let data = x.data().mapv(fwd);
            Tensor::from_op(data, vec![x.clone()], Box::new(TheOp))
        }
    };
}

unary_op!(relu, "relu", |v| v.max(0.0), |g, x, _y| {
    let mut out = g.clone();
    out.zip_mut_with(x, |gv, &xv| {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    });
    out
});

unary_op!(sigmoid, "sigmoid", |v| 1.0 / (1.0 + (-v).exp()), |g, _x, y| {
    let mut out = g.clone();
    out.zip_mut_with(y, |gv, &yv| *gv *= yv * (1.0 - yv));
    out
});

unary_op!(tanh, "tanh", |v| v.tanh(), |g, _x, y| {
    let mut out = g.clone();
    out.zip_mut_with(y, |gv, &yv| *gv *= 1.0 - yv * yv);
    out
});

unary_op!(exp, "exp", |v| v.exp(), |g, _x, y| {
    let mut out = g.clone();
    out.zip_mut_with(y, |gv, &yv| *gv *= yv);
    out
});

unary_op!(ln, "ln", |v| v.ln(), |g, x, _y| {
    let mut out = g.clone();
    out.zip_mut_with(x, |gv, &xv| *gv /= xv);
    out
});

unary_op!(sqrt, "sqrt", |v| v.sqrt(), |g, _x, y| {
    let mut out = g.clone();
    out.zip_mut_with(y, |gv, &yv| *gv *= 0.5 / yv);
    out
});

unary_op!(square, "square", |v| v * v, |g, x, _y| {
    let mut out = g.clone();
    out.zip_mut_with(x, |gv, &xv| *gv *= 2.0 * xv);
    out
});

unary_op!(abs, "abs", |v| v.abs(), |g, x, _y| {
    let mut out = g.clone();
    out.zip_mut_with(x, |gv, &xv| *gv *= xv.signum());
    out
});

unary_op!(neg, "neg", |v| -v, |g, _x, _y| g.mapv(|v| -v));

pub fn leaky_relu(x: &Tensor, alpha: f64) -> Tensor {
    struct LeakyRelu(f64);
    impl Op for LeakyRelu {
        fn name(&self) -> &'static str {
            "leaky_relu"
        }
        fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let x = parents[0].data();
            let mut out = grad.clone();
            out.zip_mut_with(&x, |gv, &xv| {
                if xv <= 0.0 {
                    *gv *= self.0;
                }
            });
            vec![Some(out)]
        }
    }
    let data = x.data().mapv(|v| if v > 0.0 { v } else { alpha * v });
    Tensor::from_op(data, vec![x.clone()], Box::new(LeakyRelu(alpha)))
}

pub fn elu(x: &Tensor, alpha: f64) -> Tensor {
    struct Elu(f64);
    impl Op for Elu {
        fn name(&self) -> &'static str {
            "elu"
        }
        fn backward(&self, grad: &Arr, parents: &[Tensor], out: &Arr) -> Vec<Option<Arr>> {
            let x = parents[0].data();
            let mut g = grad.clone();
            ndarray::Zip::from(&mut g).and(&*x).and(out).for_each(|gv, &xv, &yv| {
                if xv <= 0.0 {
                    *gv *= yv + self.0;
                }
            });
            vec![Some(g)]
        }
    }
    let data = x.data().mapv(|v| if v > 0.0 { v } else { alpha * (v.exp() - 1.0) });
    Tensor::from_op(data, vec![x.clone()], Box::new(Elu(alpha)))
}

pub fn scale(x: &Tensor, c: f64) -> Tensor {
    struct Scale(f64);
    impl Op for Scale {
        fn name(&self) -> &'static str {
            "scale"
        }
        fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            vec![Some(grad.mapv(|v| v * self.0))]
        }
    }
    let data = x.data().mapv(|v| v * c);
    Tensor::from_op(data, vec![x.clone()], Box::new(Scale(c)))
}

pub fn add_const(x: &Tensor, c: f64) -> Tensor {
    struct AddConst;
    impl Op for AddConst {
        fn name(&self) -> &'static str {
            "add_const"
        }
        fn backward(&self, grad: &Arr, _parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            vec![Some(grad.clone())]
        }
    }
    let data = x.data().mapv(|v| v + c);
    Tensor::from_op(data, vec![x.clone()], Box::new(AddConst))
}

fn same_shape(a: &Tensor, b: &Tensor) -> bool {
    *a.data().shape() == *b.data().shape()
}

/// `a + b`; `b` may broadcast to `a`'s shape.
pub fn add(a: &Tensor, b: &Tensor) -> Tensor {
    struct AddSame;
    impl Op for AddSame {
        fn name(&self) -> &'static str {
            "add"
        }
        fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let ga = parents[0].needs_grad().then(|| grad.clone());
            let gb = parents[1].needs_grad().then(|| grad.clone());
            vec![ga, gb]
        }
    }
    struct AddBroadcast {
        rhs_shape: Vec<usize>,
    }
    impl Op for AddBroadcast {
        fn name(&self) -> &'static str {
            "add_b"
        }
        fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let ga = parents[0].needs_grad().then(|| grad.clone());
            let gb = parents[1].needs_grad().then(|| reduce_to(grad, &self.rhs_shape));
            vec![ga, gb]
        }
    }
    if same_shape(a, b) {
        let data = &*a.data() + &*b.data();
        Tensor::from_op(data, vec![a.clone(), b.clone()], Box::new(AddSame))
    } else {
        let rhs_shape = b.shape();
        let data = &*a.data() + &broadcast_to(&b.data(), &a.shape());
        Tensor::from_op(data, vec![a.clone(), b.clone()], Box::new(AddBroadcast { rhs_shape }))
    }
}

/// `a - b`; `b` may broadcast to `a`'s shape.
pub fn sub(a: &Tensor, b: &Tensor) -> Tensor {
    struct SubOp {
        rhs_shape: Vec<usize>,
    }
    impl Op for SubOp {
        fn name(&self) -> &'static str {
            "sub"
        }
        fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let ga = parents[0].needs_grad().then(|| grad.clone());
            let gb = parents[1]
                .needs_grad()
                .then(|| reduce_to(&grad.mapv(|v| -v), &self.rhs_shape));
            vec![ga, gb]
        }
    }
    let rhs_shape = b.shape();
    let data = if same_shape(a, b) {
        &*a.data() - &*b.data()
    } else {
        &*a.data() - &broadcast_to(&b.data(), &a.shape())
    };
    Tensor::from_op(data, vec![a.clone(), b.clone()], Box::new(SubOp { rhs_shape }))
}

/// `a * b` elementwise; `b` may broadcast to `a`'s shape.
pub fn mul(a: &Tensor, b: &Tensor) -> Tensor {
    struct MulOp {
        rhs_shape: Vec<usize>,
    }
    impl Op for MulOp {
        fn name(&self) -> &'static str {
            "mul"
        }
        fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let a = parents[0].data();
            let b = parents[1].data();
            let ga = parents[0]
                .needs_grad()
                .then(|| grad * &broadcast_to(&b, a.shape()));
            let gb = parents[1]
                .needs_grad()
                .then(|| reduce_to(&(grad * &*a), &self.rhs_shape));
            vec![ga, gb]
        }
    }
    let rhs_shape = b.shape();
    let data = if same_shape(a, b) {
        &*a.data() * &*b.data()
    } else {
        &*a.data() * &broadcast_to(&b.data(), &a.shape())
    };
    Tensor::from_op(data, vec![a.clone(), b.clone()], Box::new(MulOp { rhs_shape }))
}

/// `a / b` elementwise; `b` may broadcast to `a`'s shape.
pub fn div(a: &Tensor, b: &Tensor) -> Tensor {
    struct DivOp {
        rhs_shape: Vec<usize>,
    }
    impl Op for DivOp {
        fn name(&self) -> &'static str {
            "div"
        }
        fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let a = parents[0].data();
            let b_full = broadcast_to(&parents[1].data(), a.shape());
            let ga = parents[0].needs_grad().then(|| grad / &b_full);
            let gb = parents[1].needs_grad().then(|| {
                let g_full = -(grad * &*a) / &(&b_full * &b_full);
                reduce_to(&g_full, &self.rhs_shape)
            });
            vec![ga, gb]
        }
    }
    let rhs_shape = b.shape();
    let data = if same_shape(a, b) {
        &*a.data() / &*b.data()
    } else {
        &*a.data() / &broadcast_to(&b.data(), &a.shape())
    };
    Tensor::from_op(data, vec![a.clone(), b.clone()], Box::new(DivOp { rhs_shape }))
}

/// Elementwise maximum of two same-shape tensors. Ties route the gradient to
/// the first operand.
pub fn max2(a: &Tensor, b: &Tensor) -> Tensor {
    struct Max2;
    impl Op for Max2 {
        fn name(&self) -> &'static str {
            "max2"
        }
        fn backward(&self, grad: &Arr, parents: &[Tensor], _out: &Arr) -> Vec<Option<Arr>> {
            let a = parents[0].data();
            let b = parents[1].data();
            let ga = parents[0].needs_grad().then(|| {
                let mut g = grad.clone();
                ndarray::Zip::from(&mut g).and(&*a).and(&*b).for_each(|gv, &av, &bv| {
                    if av < bv {
                        *gv = 0.0;
                    }
                });
                g
            });
            let gb = parents[1].needs_grad().then(|| {
                let mut g = grad.clone();
                ndarray::Zip::from(&mut g).and(&*a).and(&*b).for_each(|gv, &av, &bv| {
                    if av >= bv {
                        *gv = 0.0;
                    }
                });
                g
            });
            vec![ga, gb]
        }
    }
    assert!(same_shape(a, b), "max2 requires equal shapes");
    let mut data = a.data().clone();
    data.zip_mut_with(&b.data(), |av, &bv| *av = av.max(bv));
    Tensor::from_op(data, vec![a.clone(), b.clone()], Box::new(Max2))
}
