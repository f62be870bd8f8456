//! Differentiable primitives: convolution, linear layers, ReLU, global
//! max-pooling, softmax, sigmoid, FiLM, and channel concatenation.
//!
//! Every `forward` returns the cache its `backward` needs; `backward`
//! accumulates parameter gradients into caller-provided buffers (NMN
//! modules share one convolution, so gradients must sum across uses)
//! and returns the input gradient.

use crate::tensor::{gemm_acc, Scalar, Tensor};

/// 2-D convolution over `[H, W, C]` feature maps.
///
/// Kernel layout `[KH, KW, IC, OC]`; flattened row-major it is exactly the
/// `[KH*KW*IC, OC]` matrix used by the im2col product, and its columns are
/// the per-output-unit incoming weight vectors that norm clipping acts on.
#[derive(Debug, Clone)]
pub struct Conv2d<F: Scalar> {
    pub w: Tensor<F>,
    pub b: Option<Tensor<F>>,
    pub stride: usize,
    pub pad: usize,
}

/// Cache for the convolution backward pass: the im2col patch matrix and
/// the geometry needed to scatter gradients back onto the input.
#[derive(Debug, Clone)]
pub struct ConvCache<F: Scalar> {
    cols: Vec<F>,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(kh: usize, kw: usize, ic: usize, oc: usize, stride: usize, pad: usize, bias: bool) -> Self {
        Conv2d {
            w: Tensor::zeros(&[kh, kw, ic, oc]),
            b: bias.then(|| Tensor::zeros(&[oc])),
            stride,
            pad,
        }
    }

    /// Convolution with SAME padding for odd `k` at stride 1.
    pub fn same(k: usize, ic: usize, oc: usize, bias: bool) -> Self {
        assert!(k % 2 == 1, "SAME padding requires an odd kernel");
        Conv2d::new(k, k, ic, oc, 1, (k - 1) / 2, bias)
    }

    pub fn kernel(&self) -> (usize, usize, usize, usize) {
        let s = self.w.shape();
        (s[0], s[1], s[2], s[3])
    }

    pub fn out_dims(&self, in_h: usize, in_w: usize) -> (usize, usize) {
        let (kh, kw, _, _) = self.kernel();
        assert!(
            in_h + 2 * self.pad >= kh && in_w + 2 * self.pad >= kw,
            "input {}x{} too small for {}x{} kernel",
            in_h,
            in_w,
            kh,
            kw
        );
        (
            (in_h + 2 * self.pad - kh) / self.stride + 1,
            (in_w + 2 * self.pad - kw) / self.stride + 1,
        )
    }

    pub fn forward(&self, input: &Tensor<F>) -> (Tensor<F>, ConvCache<F>) {
        let (kh, kw, ic, oc) = self.kernel();
        let shape = input.shape();
        assert_eq!(shape.len(), 3, "conv input must be [H, W, C]");
        let (in_h, in_w) = (shape[0], shape[1]);
        assert_eq!(shape[2], ic, "conv input channels");
        let (out_h, out_w) = self.out_dims(in_h, in_w);

        let m = out_h * out_w;
        let k = kh * kw * ic;
        let mut cols = vec![F::ZERO; m * k];
        let data = input.data();
        for oy in 0..out_h {
            for ox in 0..out_w {
                let row = (oy * out_w + ox) * k;
                for ky in 0..kh {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= in_h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= in_w as isize {
                            continue;
                        }
                        let src = ((iy as usize) * in_w + ix as usize) * ic;
                        let dst = row + (ky * kw + kx) * ic;
                        cols[dst..dst + ic].copy_from_slice(&data[src..src + ic]);
                    }
                }
            }
        }

        let mut out = Tensor::zeros(&[out_h, out_w, oc]);
        gemm_acc(
            m,
            k,
            oc,
            &cols,
            k as isize,
            1,
            self.w.data(),
            oc as isize,
            1,
            F::ZERO,
            out.data_mut(),
        );
        if let Some(b) = &self.b {
            let bias = b.data();
            for row in out.data_mut().chunks_exact_mut(oc) {
                for (v, bv) in row.iter_mut().zip(bias) {
                    *v += *bv;
                }
            }
        }
        (
            out,
            ConvCache {
                cols,
                in_h,
                in_w,
                out_h,
                out_w,
            },
        )
    }

    /// Accumulates `dw` (and `db` when present) and returns the gradient
    /// with respect to the input map.
    pub fn backward(
        &self,
        cache: &ConvCache<F>,
        dout: &Tensor<F>,
        dw: &mut Tensor<F>,
        mut db: Option<&mut Tensor<F>>,
    ) -> Tensor<F> {
        let (kh, kw, ic, oc) = self.kernel();
        dout.assert_shape(&[cache.out_h, cache.out_w, oc]);
        dw.assert_shape(self.w.shape());
        let m = cache.out_h * cache.out_w;
        let k = kh * kw * ic;

        // dW += colsᵀ · dOut
        gemm_acc(
            k,
            m,
            oc,
            &cache.cols,
            1,
            k as isize,
            dout.data(),
            oc as isize,
            1,
            F::ONE,
            dw.data_mut(),
        );
        if let Some(db) = db.as_deref_mut() {
            db.assert_shape(&[oc]);
            let acc = db.data_mut();
            for row in dout.data().chunks_exact(oc) {
                for (a, d) in acc.iter_mut().zip(row) {
                    *a += *d;
                }
            }
        }

        // dCols = dOut · Wᵀ
        let mut dcols = vec![F::ZERO; m * k];
        gemm_acc(
            m,
            oc,
            k,
            dout.data(),
            oc as isize,
            1,
            self.w.data(),
            1,
            oc as isize,
            F::ZERO,
            &mut dcols,
        );

        // col2im scatter-add back onto the input geometry.
        let mut dinput = Tensor::zeros(&[cache.in_h, cache.in_w, ic]);
        let dst = dinput.data_mut();
        for oy in 0..cache.out_h {
            for ox in 0..cache.out_w {
                let row = (oy * cache.out_w + ox) * k;
                for ky in 0..kh {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= cache.in_h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= cache.in_w as isize {
                            continue;
                        }
                        let di = ((iy as usize) * cache.in_w + ix as usize) * ic;
                        let si = row + (ky * kw + kx) * ic;
                        for c in 0..ic {
                            dst[di + c] += dcols[si + c];
                        }
                    }
                }
            }
        }
        dinput
    }
}

/// Fully-connected layer over flat vectors. Weight layout `[IN, OUT]`.
#[derive(Debug, Clone)]
pub struct Linear<F: Scalar> {
    pub w: Tensor<F>,
    pub b: Option<Tensor<F>>,
}

impl<F: Scalar> Linear<F> {
    pub fn new(n_in: usize, n_out: usize, bias: bool) -> Self {
        Linear {
            w: Tensor::zeros(&[n_in, n_out]),
            b: bias.then(|| Tensor::zeros(&[n_out])),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.w.shape()[0], self.w.shape()[1])
    }

    pub fn forward(&self, x: &[F]) -> Vec<F> {
        let (n_in, n_out) = self.dims();
        assert_eq!(x.len(), n_in, "linear input width");
        let mut y = match &self.b {
            Some(b) => b.data().to_vec(),
            None => vec![F::ZERO; n_out],
        };
        gemm_acc(
            1,
            n_in,
            n_out,
            x,
            n_in as isize,
            1,
            self.w.data(),
            n_out as isize,
            1,
            F::ONE,
            &mut y,
        );
        y
    }

    /// Accumulates parameter gradients and returns dX.
    pub fn backward(
        &self,
        x: &[F],
        dy: &[F],
        dw: &mut Tensor<F>,
        db: Option<&mut Tensor<F>>,
    ) -> Vec<F> {
        let (n_in, n_out) = self.dims();
        assert_eq!(x.len(), n_in);
        assert_eq!(dy.len(), n_out);
        let dwd = dw.data_mut();
        for (i, xi) in x.iter().enumerate() {
            let row = &mut dwd[i * n_out..(i + 1) * n_out];
            for (w, d) in row.iter_mut().zip(dy) {
                *w += *xi * *d;
            }
        }
        if let Some(db) = db {
            for (a, d) in db.data_mut().iter_mut().zip(dy) {
                *a += *d;
            }
        }
        let mut dx = vec![F::ZERO; n_in];
        gemm_acc(
            1,
            n_out,
            n_in,
            dy,
            n_out as isize,
            1,
            self.w.data(),
            1,
            n_out as isize,
            F::ZERO,
            &mut dx,
        );
        dx
    }
}

/// Elementwise ReLU.
pub fn relu<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let data = x.data().iter().map(|&v| v.max(F::ZERO)).collect();
    Tensor::from_vec(x.shape(), data)
}

/// ReLU gradient: passes `dy` where the pre-activation was strictly positive.
pub fn relu_backward<F: Scalar>(pre: &Tensor<F>, dy: &Tensor<F>) -> Tensor<F> {
    assert_eq!(pre.shape(), dy.shape());
    let data = pre
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&p, &d)| if p > F::ZERO { d } else { F::ZERO })
        .collect();
    Tensor::from_vec(pre.shape(), data)
}

pub fn relu_vec<F: Scalar>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| v.max(F::ZERO)).collect()
}

pub fn relu_vec_backward<F: Scalar>(pre: &[F], dy: &[F]) -> Vec<F> {
    pre.iter()
        .zip(dy)
        .map(|(&p, &d)| if p > F::ZERO { d } else { F::ZERO })
        .collect()
}

/// Global spatial max-pool over an `[H, W, C]` map; returns the pooled
/// vector and, per channel, the flat spatial index of the maximum.
/// Scan order is row-major with strict `>`, so the first maximum wins.
pub fn maxpool_global<F: Scalar>(h: &Tensor<F>) -> (Vec<F>, Vec<usize>) {
    let s = h.shape();
    assert_eq!(s.len(), 3, "maxpool input must be [H, W, C]");
    let (hh, ww, cc) = (s[0], s[1], s[2]);
    assert!(hh * ww > 0);
    let data = h.data();
    let mut best = data[..cc].to_vec();
    let mut arg = vec![0usize; cc];
    for p in 1..hh * ww {
        let row = &data[p * cc..(p + 1) * cc];
        for c in 0..cc {
            if row[c] > best[c] {
                best[c] = row[c];
                arg[c] = p;
            }
        }
    }
    (best, arg)
}

/// Scatters the pooled gradient back to the argmax locations.
pub fn maxpool_global_backward<F: Scalar>(
    shape: &[usize],
    argmax: &[usize],
    dpooled: &[F],
) -> Tensor<F> {
    let cc = shape[2];
    assert_eq!(argmax.len(), cc);
    assert_eq!(dpooled.len(), cc);
    let mut dh = Tensor::zeros(shape);
    let data = dh.data_mut();
    for c in 0..cc {
        data[argmax[c] * cc + c] += dpooled[c];
    }
    dh
}

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    assert!(!logits.is_empty());
    let mut m = logits[0];
    for &v in &logits[1..] {
        m = m.max(v);
    }
    let exps: Vec<F> = logits.iter().map(|&v| (v - m).exp()).collect();
    let mut sum = F::ZERO;
    for &e in &exps {
        sum += e;
    }
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax Jacobian-vector product: given probabilities and dL/dprobs,
/// returns dL/dlogits.
pub fn softmax_backward<F: Scalar>(probs: &[F], dprobs: &[F]) -> Vec<F> {
    assert_eq!(probs.len(), dprobs.len());
    let mut dot = F::ZERO;
    for (&p, &d) in probs.iter().zip(dprobs) {
        dot += p * d;
    }
    probs
        .iter()
        .zip(dprobs)
        .map(|(&p, &d)| p * (d - dot))
        .collect()
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    // Branch on sign for stability at large |x|.
    if x >= F::ZERO {
        F::ONE / (F::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::ONE + e)
    }
}

/// dL/dlogit from dL/dp for `p = sigmoid(logit)`.
pub fn sigmoid_backward<F: Scalar>(p: F, dp: F) -> F {
    dp * p * (F::ONE - p)
}

/// FiLM: `out[y,x,c] = (1 + gamma[c]) * pre[y,x,c] + beta[c]`.
pub fn film<F: Scalar>(pre: &Tensor<F>, gamma: &[F], beta: &[F]) -> Tensor<F> {
    let c = *pre.shape().last().expect("film input has channels");
    assert_eq!(gamma.len(), c, "film gamma width");
    assert_eq!(beta.len(), c, "film beta width");
    let mut out = pre.clone();
    for row in out.data_mut().chunks_exact_mut(c) {
        for i in 0..c {
            row[i] = (F::ONE + gamma[i]) * row[i] + beta[i];
        }
    }
    out
}

/// FiLM gradients: returns dPre and accumulates dGamma / dBeta.
pub fn film_backward<F: Scalar>(
    pre: &Tensor<F>,
    gamma: &[F],
    dout: &Tensor<F>,
    dgamma: &mut [F],
    dbeta: &mut [F],
) -> Tensor<F> {
    assert_eq!(pre.shape(), dout.shape());
    let c = *pre.shape().last().unwrap();
    assert_eq!(gamma.len(), c);
    let mut dpre = dout.clone();
    for (prow, drow) in pre
        .data()
        .chunks_exact(c)
        .zip(dpre.data_mut().chunks_exact_mut(c))
    {
        for i in 0..c {
            dgamma[i] += drow[i] * prow[i];
            dbeta[i] += drow[i];
            drow[i] *= F::ONE + gamma[i];
        }
    }
    dpre
}

/// Concatenates two `[H, W, C]` maps along the channel axis.
pub fn concat_channels<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Tensor<F> {
    let (sa, sb) = (a.shape(), b.shape());
    assert_eq!(sa[0], sb[0]);
    assert_eq!(sa[1], sb[1]);
    let (ca, cb) = (sa[2], sb[2]);
    let mut out = Tensor::zeros(&[sa[0], sa[1], ca + cb]);
    let dst = out.data_mut();
    for p in 0..sa[0] * sa[1] {
        dst[p * (ca + cb)..p * (ca + cb) + ca].copy_from_slice(&a.data()[p * ca..(p + 1) * ca]);
        dst[p * (ca + cb) + ca..(p + 1) * (ca + cb)].copy_from_slice(&b.data()[p * cb..(p + 1) * cb]);
    }
    out
}

/// Splits a concatenated-channel gradient back into the two operands.
pub fn split_channels<F: Scalar>(d: &Tensor<F>, ca: usize) -> (Tensor<F>, Tensor<F>) {
    let s = d.shape();
    let cb = s[2] - ca;
    let mut da = Tensor::zeros(&[s[0], s[1], ca]);
    let mut db = Tensor::zeros(&[s[0], s[1], cb]);
    for p in 0..s[0] * s[1] {
        da.data_mut()[p * ca..(p + 1) * ca]
            .copy_from_slice(&d.data()[p * (ca + cb)..p * (ca + cb) + ca]);
        db.data_mut()[p * cb..(p + 1) * cb]
            .copy_from_slice(&d.data()[p * (ca + cb) + ca..(p + 1) * (ca + cb)]);
    }
    (da, db)
}
