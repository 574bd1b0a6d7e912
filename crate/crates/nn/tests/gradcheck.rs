//! Central finite-difference validation of every backward rule.
//!
//! Each case builds a scalar loss `sum(f(params) * mask)` with a fixed random
//! mask, backprops, and compares the analytic gradient of every parameter
//! element against `(L(p+h) - L(p-h)) / 2h`.

use ndarray::IxDyn;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spoofbench_nn::{layers, ops, Arr, Tensor};

fn rand_arr(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Arr {
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Arr::from_shape_vec(IxDyn(shape), v).unwrap()
}

/// Check d(loss)/d(param) for every param element against central differences.
fn check<F>(make_loss: F, params: &[Tensor], tol: f64)
where
    F: Fn(&[Tensor]) -> Tensor,
{
    let loss = make_loss(params);
    assert_eq!(loss.len(), 1, "loss must be scalar");
    loss.backward();
    let analytic: Vec<Arr> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| Arr::zeros(p.data().raw_dim())))
        .collect();
    for p in params {
        p.zero_grad();
    }

    let h = 1e-5;
    for (pi, p) in params.iter().enumerate() {
        let base = p.data().clone();
        let n = base.len();
        // Probe at most 24 elements per tensor, spread evenly.
        let step = (n / 24).max(1);
        for flat in (0..n).step_by(step) {
            let mut plus = base.clone();
            plus.as_slice_mut().unwrap()[flat] += h;
            p.set_data(plus);
            let lp = make_loss(params).scalar_value();

            let mut minus = base.clone();
            minus.as_slice_mut().unwrap()[flat] -= h;
            p.set_data(minus);
            let lm = make_loss(params).scalar_value();

            p.set_data(base.clone());
            let numeric = (lp - lm) / (2.0 * h);
            let got = analytic[pi].as_slice().unwrap()[flat];
            let denom = 1.0f64.max(numeric.abs()).max(got.abs());
            assert!(
                (numeric - got).abs() / denom < tol,
                "param {pi} elem {flat}: analytic {got} vs numeric {numeric}"
            );
        }
    }
}

fn scalarize(y: &Tensor, rng: &mut ChaCha8Rng) -> Tensor {
    let mask = Tensor::constant(rand_arr(rng, &y.shape(), 1.0));
    ops::sum_all(&ops::mul(y, &mask))
}

#[test]
fn elementwise_unary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    type UnaryFn = fn(&Tensor) -> Tensor;
    let cases: Vec<(&str, UnaryFn)> = vec![
        ("relu", |x| ops::relu(x)),
        ("leaky", |x| ops::leaky_relu(x, 0.3)),
        ("elu", |x| ops::elu(x, 1.0)),
        ("sigmoid", |x| ops::sigmoid(x)),
        ("tanh", |x| ops::tanh(x)),
        ("exp", |x| ops::exp(x)),
        ("square", |x| ops::square(x)),
        ("abs", |x| ops::abs(x)),
        ("neg", |x| ops::neg(x)),
        ("scale", |x| ops::scale(x, -2.5)),
        ("add_const", |x| ops::add_const(x, 0.7)),
    ];
    for (name, f) in cases {
        let p = Tensor::param(rand_arr(&mut rng, &[3, 5], 2.0));
        let mask_rng = &mut ChaCha8Rng::seed_from_u64(7);
        check(
            |ps| scalarize(&f(&ps[0]), &mut mask_rng.clone()),
            &[p],
            1e-6,
        );
        let _ = name;
    }
    // ln and sqrt need positive inputs
    let p = Tensor::param(rand_arr(&mut rng, &[3, 5], 1.0).mapv(|v| v.abs() + 0.5));
    let mask_rng = ChaCha8Rng::seed_from_u64(9);
    check(|ps| scalarize(&ops::ln(&ps[0]), &mut mask_rng.clone()), &[p], 1e-6);
    let p = Tensor::param(rand_arr(&mut rng, &[3, 5], 1.0).mapv(|v| v.abs() + 0.5));
    check(|ps| scalarize(&ops::sqrt(&ps[0]), &mut mask_rng.clone()), &[p], 1e-6);
}

#[test]
fn elementwise_binary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = Tensor::param(rand_arr(&mut rng, &[4, 3], 2.0));
    let b = Tensor::param(rand_arr(&mut rng, &[4, 3], 2.0));
    let mask_rng = ChaCha8Rng::seed_from_u64(11);
    check(
        |ps| scalarize(&ops::add(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a.clone(), b.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::sub(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a.clone(), b.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::mul(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a.clone(), b.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::max2(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a.clone(), b.clone()],
        1e-6,
    );
    let bpos = Tensor::param(rand_arr(&mut rng, &[4, 3], 1.0).mapv(|v| v.abs() + 0.7));
    check(
        |ps| scalarize(&ops::div(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a, bpos],
        1e-6,
    );
}

#[test]
fn broadcast_binary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = Tensor::param(rand_arr(&mut rng, &[2, 4, 3], 2.0));
    let bias = Tensor::param(rand_arr(&mut rng, &[3], 1.0));
    let chan = Tensor::param(rand_arr(&mut rng, &[1, 4, 1], 1.0));
    let mask_rng = ChaCha8Rng::seed_from_u64(13);
    check(
        |ps| scalarize(&ops::add(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a.clone(), bias.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::mul(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a.clone(), chan.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::sub(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a.clone(), bias.clone()],
        1e-6,
    );
    let cpos = Tensor::param(rand_arr(&mut rng, &[1, 4, 1], 1.0).mapv(|v| v.abs() + 0.6));
    check(
        |ps| scalarize(&ops::div(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a, cpos],
        1e-6,
    );
}

#[test]
fn reductions_and_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = Tensor::param(rand_arr(&mut rng, &[2, 3, 4], 2.0));
    let mask_rng = ChaCha8Rng::seed_from_u64(17);
    check(
        |ps| scalarize(&ops::mean_axes(&ps[0], &[0, 2], false), &mut mask_rng.clone()),
        &[a.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::sum_axes(&ps[0], &[1], true), &mut mask_rng.clone()),
        &[a.clone()],
        1e-6,
    );
    check(|ps| ops::mean_all(&ps[0]), &[a.clone()], 1e-6);
    check(
        |ps| scalarize(&ops::reshape(&ps[0], &[6, 4]), &mut mask_rng.clone()),
        &[a.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::swap_axes(&ps[0], 0, 2), &mut mask_rng.clone()),
        &[a.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::narrow(&ps[0], 1, 1, 2), &mut mask_rng.clone()),
        &[a.clone()],
        1e-6,
    );
    let b = Tensor::param(rand_arr(&mut rng, &[2, 2, 4], 2.0));
    check(
        |ps| scalarize(&ops::concat(&[ps[0].clone(), ps[1].clone()], 1), &mut mask_rng.clone()),
        &[a.clone(), b],
        1e-6,
    );
    let m = Tensor::param(rand_arr(&mut rng, &[5, 4], 2.0));
    check(
        |ps| scalarize(&ops::select_columns(&ps[0], &[0, 3, 1, 1, 2]), &mut mask_rng.clone()),
        &[m],
        1e-6,
    );
}

#[test]
fn matmul_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = Tensor::param(rand_arr(&mut rng, &[4, 6], 1.0));
    let b = Tensor::param(rand_arr(&mut rng, &[6, 3], 1.0));
    let mask_rng = ChaCha8Rng::seed_from_u64(19);
    check(
        |ps| scalarize(&ops::matmul(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a, b],
        1e-6,
    );
    let a3 = Tensor::param(rand_arr(&mut rng, &[3, 4, 5], 1.0));
    let b3 = Tensor::param(rand_arr(&mut rng, &[3, 5, 2], 1.0));
    check(
        |ps| scalarize(&ops::bmm(&ps[0], &ps[1]), &mut mask_rng.clone()),
        &[a3, b3],
        1e-6,
    );
}

#[test]
fn softmax_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = Tensor::param(rand_arr(&mut rng, &[3, 5], 2.0));
    let mask_rng = ChaCha8Rng::seed_from_u64(23);
    check(
        |ps| scalarize(&ops::softmax(&ps[0], 1), &mut mask_rng.clone()),
        &[a.clone()],
        1e-6,
    );
    check(
        |ps| scalarize(&ops::log_softmax(&ps[0], 1), &mut mask_rng.clone()),
        &[a.clone()],
        1e-6,
    );
    let b = Tensor::param(rand_arr(&mut rng, &[2, 4, 3], 2.0));
    check(
        |ps| scalarize(&ops::softmax(&ps[0], 1), &mut mask_rng.clone()),
        &[b],
        1e-6,
    );
    check(
        |ps| spoofbench_nn::cross_entropy(&ps[0], &[1, 0, 1]),
        &[a],
        1e-6,
    );
}

#[test]
fn conv2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mask_rng = ChaCha8Rng::seed_from_u64(29);
    // stride 1, pad 1
    let x = Tensor::param(rand_arr(&mut rng, &[2, 3, 6, 5], 1.0));
    let w = Tensor::param(rand_arr(&mut rng, &[4, 3, 3, 3], 0.5));
    check(
        |ps| scalarize(&ops::conv2d(&ps[0], &ps[1], (1, 1), (1, 1), (1, 1)), &mut mask_rng.clone()),
        &[x, w],
        1e-6,
    );
    // stride 2, asymmetric kernel, no pad
    let x = Tensor::param(rand_arr(&mut rng, &[1, 2, 9, 8], 1.0));
    let w = Tensor::param(rand_arr(&mut rng, &[3, 2, 3, 2], 0.5));
    check(
        |ps| scalarize(&ops::conv2d(&ps[0], &ps[1], (2, 2), (0, 0), (1, 1)), &mut mask_rng.clone()),
        &[x, w],
        1e-6,
    );
    // dilation 2
    let x = Tensor::param(rand_arr(&mut rng, &[1, 2, 10, 9], 1.0));
    let w = Tensor::param(rand_arr(&mut rng, &[2, 2, 3, 3], 0.5));
    check(
        |ps| scalarize(&ops::conv2d(&ps[0], &ps[1], (1, 1), (2, 2), (2, 2)), &mut mask_rng.clone()),
        &[x, w],
        1e-6,
    );
}

#[test]
fn conv1d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mask_rng = ChaCha8Rng::seed_from_u64(31);
    let x = Tensor::param(rand_arr(&mut rng, &[2, 3, 14], 1.0));
    let w = Tensor::param(rand_arr(&mut rng, &[4, 3, 5], 0.5));
    check(
        |ps| scalarize(&ops::conv1d(&ps[0], &ps[1], 2, 2, 1, 1), &mut mask_rng.clone()),
        &[x, w],
        1e-6,
    );
    // grouped (depthwise)
    let x = Tensor::param(rand_arr(&mut rng, &[2, 4, 12], 1.0));
    let w = Tensor::param(rand_arr(&mut rng, &[4, 1, 3], 0.5));
    check(
        |ps| scalarize(&ops::conv1d(&ps[0], &ps[1], 1, 1, 1, 4), &mut mask_rng.clone()),
        &[x, w],
        1e-6,
    );
    // dilated grouped with 2 groups
    let x = Tensor::param(rand_arr(&mut rng, &[1, 4, 16], 1.0));
    let w = Tensor::param(rand_arr(&mut rng, &[6, 2, 3], 0.5));
    check(
        |ps| scalarize(&ops::conv1d(&ps[0], &ps[1], 1, 2, 2, 2), &mut mask_rng.clone()),
        &[x, w],
        1e-6,
    );
}

#[test]
fn pooling_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mask_rng = ChaCha8Rng::seed_from_u64(37);
    let x = Tensor::param(rand_arr(&mut rng, &[2, 3, 8, 7], 1.0));
    check(
        |ps| scalarize(&ops::max_pool2d(&ps[0], (2, 2), (2, 2), (0, 0)), &mut mask_rng.clone()),
        &[x],
        1e-5,
    );
    let x = Tensor::param(rand_arr(&mut rng, &[2, 3, 9, 9], 1.0));
    check(
        |ps| scalarize(&ops::max_pool2d(&ps[0], (3, 3), (2, 2), (1, 1)), &mut mask_rng.clone()),
        &[x],
        1e-5,
    );
    let x = Tensor::param(rand_arr(&mut rng, &[2, 4, 15], 1.0));
    check(
        |ps| scalarize(&ops::max_pool1d(&ps[0], 3, 3), &mut mask_rng.clone()),
        &[x],
        1e-5,
    );
}

#[test]
fn layer_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mask_rng = ChaCha8Rng::seed_from_u64(41);

    let lin = layers::Linear::new(5, 3, &mut rng);
    let x = Tensor::param(rand_arr(&mut rng, &[4, 5], 1.0));
    let mut params = vec![x.clone(), lin.w.clone(), lin.b.clone()];
    check(
        |_| scalarize(&lin.forward(&x), &mut mask_rng.clone()),
        &params,
        1e-6,
    );

    let ln = layers::LayerNorm::new(6);
    let x = Tensor::param(rand_arr(&mut rng, &[3, 6], 1.0));
    params = vec![x.clone(), ln.gamma.clone(), ln.beta.clone()];
    check(
        |_| scalarize(&ln.forward(&x), &mut mask_rng.clone()),
        &params,
        1e-5,
    );

    let bn = layers::BatchNorm::new(3);
    let x = Tensor::param(rand_arr(&mut rng, &[2, 3, 4, 4], 1.0));
    params = vec![x.clone(), bn.gamma.clone(), bn.beta.clone()];
    check(
        |_| scalarize(&bn.forward(&x, true), &mut mask_rng.clone()),
        &params,
        1e-5,
    );
}

#[test]
fn recurrent_and_attention_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mask_rng = ChaCha8Rng::seed_from_u64(43);

    let lstm = layers::Lstm::new(4, 3, 2, &mut rng);
    let x = Tensor::param(rand_arr(&mut rng, &[2, 5, 4], 1.0));
    let mut params = vec![x.clone()];
    let mut state = Vec::new();
    lstm.collect("lstm", &mut state);
    params.extend(state.into_iter().map(|(_, t)| t));
    check(
        |_| scalarize(&lstm.forward(&x), &mut mask_rng.clone()),
        &params,
        1e-5,
    );

    let bilstm = layers::BiLstm::new(3, 2, &mut rng);
    let x = Tensor::param(rand_arr(&mut rng, &[2, 4, 3], 1.0));
    let mut params = vec![x.clone()];
    let mut state = Vec::new();
    bilstm.collect("b", &mut state);
    params.extend(state.into_iter().map(|(_, t)| t));
    check(
        |_| scalarize(&bilstm.forward(&x), &mut mask_rng.clone()),
        &params,
        1e-5,
    );

    let gru = layers::Gru::new(3, 4, &mut rng);
    let x = Tensor::param(rand_arr(&mut rng, &[2, 5, 3], 1.0));
    let mut params = vec![x.clone()];
    let mut state = Vec::new();
    gru.collect("g", &mut state);
    params.extend(state.into_iter().map(|(_, t)| t));
    check(
        |_| scalarize(&gru.forward_last(&x), &mut mask_rng.clone()),
        &params,
        1e-5,
    );

    let mha = layers::MultiHeadSelfAttention::new(6, 2, &mut rng);
    let x = Tensor::param(rand_arr(&mut rng, &[2, 4, 6], 1.0));
    let mut params = vec![x.clone()];
    let mut state = Vec::new();
    mha.collect("a", &mut state);
    params.extend(state.into_iter().map(|(_, t)| t));
    check(
        |_| scalarize(&mha.forward(&x), &mut mask_rng.clone()),
        &params,
        1e-5,
    );

    let pool = layers::AttentionPool::new(5, 3, &mut rng);
    let x = Tensor::param(rand_arr(&mut rng, &[2, 6, 5], 1.0));
    let mut params = vec![x.clone()];
    let mut state = Vec::new();
    pool.collect("p", &mut state);
    params.extend(state.into_iter().map(|(_, t)| t));
    check(
        |_| scalarize(&pool.forward(&x), &mut mask_rng.clone()),
        &params,
        1e-5,
    );
}

#[test]
fn adam_reduces_quadratic() {
    let target = 3.7;
    let p = Tensor::param(Arr::from_elem(IxDyn(&[1]), 0.0));
    let mut opt = spoofbench_nn::optim::Adam::new(vec![p.clone()], 0.1);
    for _ in 0..500 {
        opt.zero_grad();
        let diff = ops::add_const(&p, -target);
        let loss = ops::mean_all(&ops::square(&diff));
        loss.backward();
        opt.step();
    }
    assert!((p.data()[[0]] - target).abs() < 1e-3);
}
