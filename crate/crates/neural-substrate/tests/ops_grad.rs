//! Finite-difference verification of every primitive's backward pass,
//! at f64 on small random instances.

use neural_substrate::{
    assert_grads_match, fd_gradient, film, film_backward, maxpool_global,
    maxpool_global_backward, relu, relu_backward, sigmoid, sigmoid_backward, softmax,
    softmax_backward, Conv2d, Linear, Lstm, Tensor,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fill(t: &mut Tensor<f64>, rng: &mut ChaCha8Rng) {
    for v in t.data_mut() {
        *v = rng.gen::<f64>() - 0.5;
    }
}

fn fill_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    // (stride, pad, kernel, in, out, h, w) covering VALID, SAME, stride 2.
    let cases = [
        (1usize, 0usize, 3usize, 2usize, 3usize, 5usize, 6usize),
        (1, 1, 3, 2, 2, 4, 4),
        (2, 0, 2, 1, 2, 6, 6),
        (3, 0, 8, 2, 2, 11, 11),
    ];
    for (case, &(stride, pad, k, ic, oc, h, w)) in cases.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + case as u64);
        let mut conv: Conv2d<f64> = Conv2d::new(k, k, ic, oc, stride, pad, true);
        fill(&mut conv.w, &mut rng);
        fill(conv.b.as_mut().unwrap(), &mut rng);
        let mut input = Tensor::zeros(&[h, w, ic]);
        fill(&mut input, &mut rng);

        let (out, cache) = conv.forward(&input);
        let probe = fill_vec(out.len(), &mut rng);
        let dout = Tensor::from_vec(out.shape(), probe.clone());
        let mut dw = conv.w.zeros_like();
        let mut db = conv.b.as_ref().unwrap().zeros_like();
        let dinput = conv.backward(&cache, &dout, &mut dw, Some(&mut db));

        let mut analytic = Vec::new();
        analytic.extend_from_slice(dw.data());
        analytic.extend_from_slice(db.data());
        analytic.extend_from_slice(dinput.data());

        let w_len = conv.w.len();
        let b_len = db.len();
        let base: Vec<f64> = conv
            .w
            .data()
            .iter()
            .chain(conv.b.as_ref().unwrap().data())
            .chain(input.data())
            .copied()
            .collect();
        let numeric = fd_gradient(
            |flat: &[f64]| {
                let mut c2 = conv.clone();
                c2.w = Tensor::from_vec(conv.w.shape(), flat[..w_len].to_vec());
                c2.b = Some(Tensor::from_vec(&[b_len], flat[w_len..w_len + b_len].to_vec()));
                let inp = Tensor::from_vec(input.shape(), flat[w_len + b_len..].to_vec());
                let (o, _) = c2.forward(&inp);
                dot(o.data(), &probe)
            },
            &base,
        );
        assert_grads_match(&analytic, &numeric, &format!("conv case {}", case));
    }
}

#[test]
fn linear_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(910);
    let mut lin: Linear<f64> = Linear::new(7, 4, true);
    fill(&mut lin.w, &mut rng);
    fill(lin.b.as_mut().unwrap(), &mut rng);
    let x = fill_vec(7, &mut rng);
    let probe = fill_vec(4, &mut rng);

    let mut dw = lin.w.zeros_like();
    let mut db = lin.b.as_ref().unwrap().zeros_like();
    let dx = lin.backward(&x, &probe, &mut dw, Some(&mut db));
    let mut analytic = Vec::new();
    analytic.extend_from_slice(dw.data());
    analytic.extend_from_slice(db.data());
    analytic.extend_from_slice(&dx);

    let base: Vec<f64> = lin
        .w
        .data()
        .iter()
        .chain(lin.b.as_ref().unwrap().data())
        .chain(x.iter())
        .copied()
        .collect();
    let numeric = fd_gradient(
        |flat: &[f64]| {
            let mut l2 = lin.clone();
            l2.w = Tensor::from_vec(&[7, 4], flat[..28].to_vec());
            l2.b = Some(Tensor::from_vec(&[4], flat[28..32].to_vec()));
            dot(&l2.forward(&flat[32..]), &probe)
        },
        &base,
    );
    assert_grads_match(&analytic, &numeric, "linear");
}

#[test]
fn film_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(920);
    let c = 5;
    let mut pre = Tensor::zeros(&[3, 4, c]);
    fill(&mut pre, &mut rng);
    let gamma = fill_vec(c, &mut rng);
    let beta = fill_vec(c, &mut rng);
    let out = film(&pre, &gamma, &beta);
    let probe = fill_vec(out.len(), &mut rng);
    let dout = Tensor::from_vec(out.shape(), probe.clone());

    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    let dpre = film_backward(&pre, &gamma, &dout, &mut dgamma, &mut dbeta);
    let mut analytic = Vec::new();
    analytic.extend_from_slice(&dgamma);
    analytic.extend_from_slice(&dbeta);
    analytic.extend_from_slice(dpre.data());

    let base: Vec<f64> = gamma
        .iter()
        .chain(beta.iter())
        .chain(pre.data())
        .copied()
        .collect();
    let numeric = fd_gradient(
        |flat: &[f64]| {
            let g = &flat[..c];
            let b = &flat[c..2 * c];
            let p = Tensor::from_vec(pre.shape(), flat[2 * c..].to_vec());
            dot(film(&p, g, b).data(), &probe)
        },
        &base,
    );
    assert_grads_match(&analytic, &numeric, "film");
}

#[test]
fn relu_and_maxpool_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(930);
    let mut x = Tensor::zeros(&[4, 3, 3]);
    fill(&mut x, &mut rng);
    let probe = fill_vec(3, &mut rng);

    // Composite: maxpool(relu(x)) probed on the pooled vector.
    let a = relu(&x);
    let (pooled, argmax) = maxpool_global(&a);
    let _ = pooled;
    let dpooled = probe.clone();
    let da = maxpool_global_backward(a.shape(), &argmax, &dpooled);
    let dx = relu_backward(&x, &da);

    let numeric = fd_gradient(
        |flat: &[f64]| {
            let xt = Tensor::from_vec(x.shape(), flat.to_vec());
            let (p, _) = maxpool_global(&relu(&xt));
            dot(&p, &probe)
        },
        &x.data().to_vec(),
    );
    assert_grads_match(dx.data(), &numeric, "relu+maxpool");
}

#[test]
fn softmax_and_sigmoid_backward_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(940);
    let logits = fill_vec(6, &mut rng);
    let probe = fill_vec(6, &mut rng);
    let probs = softmax(&logits);
    let analytic = softmax_backward(&probs, &probe);
    let numeric = fd_gradient(
        |flat: &[f64]| dot(&softmax(flat), &probe),
        &logits,
    );
    assert_grads_match(&analytic, &numeric, "softmax");

    let z = 0.37;
    let p = sigmoid(z);
    let analytic = vec![sigmoid_backward(p, 1.0)];
    let numeric = fd_gradient(|flat: &[f64]| sigmoid(flat[0]), &[z]);
    assert_grads_match(&analytic, &numeric, "sigmoid");
}

#[test]
fn lstm_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(950);
    let (n_in, hidden, steps) = (3usize, 4usize, 5usize);
    let mut lstm: Lstm<f64> = Lstm::new(n_in, hidden);
    fill(&mut lstm.w_x, &mut rng);
    fill(&mut lstm.w_h, &mut rng);
    fill(&mut lstm.b, &mut rng);
    let xs: Vec<Vec<f64>> = (0..steps).map(|_| fill_vec(n_in, &mut rng)).collect();
    let probe = fill_vec(hidden, &mut rng);

    let (h_t, cache) = lstm.forward(&xs);
    let _ = h_t;
    let dh: Vec<f64> = probe.clone();
    let mut grads = Lstm::new(n_in, hidden);
    lstm.backward(&cache, &dh, &mut grads);
    let mut analytic = Vec::new();
    analytic.extend_from_slice(grads.w_x.data());
    analytic.extend_from_slice(grads.w_h.data());
    analytic.extend_from_slice(grads.b.data());

    let (lx, lh, lb) = (lstm.w_x.len(), lstm.w_h.len(), lstm.b.len());
    let base: Vec<f64> = lstm
        .w_x
        .data()
        .iter()
        .chain(lstm.w_h.data())
        .chain(lstm.b.data())
        .copied()
        .collect();
    let numeric = fd_gradient(
        |flat: &[f64]| {
            let mut l2 = Lstm::new(n_in, hidden);
            l2.w_x = Tensor::from_vec(lstm.w_x.shape(), flat[..lx].to_vec());
            l2.w_h = Tensor::from_vec(lstm.w_h.shape(), flat[lx..lx + lh].to_vec());
            l2.b = Tensor::from_vec(&[lb], flat[lx + lh..].to_vec());
            let (h, _) = l2.forward(&xs);
            dot(&h, &probe)
        },
        &base,
    );
    assert_grads_match(&analytic, &numeric, "lstm");
}
