//! FiLM-LSTM trunk: a 5-layer convnet conditioned on the instruction by
//! feature-wise linear modulation, with coefficients projected from the
//! final hidden state of an LSTM reading the flat token sequence.
//!
//! Layer k computes `h_k = ReLU((1 + γ_k) ⊙ (W_k ∗ h_{k−1}) ⊕ β_k)` with
//! `γ_k = W_k^γ h_LSTM + b_k^γ` and `β_k = W_k^β h_LSTM + b_k^β`; the
//! convolutions carry no bias of their own. Layer 5's input receives a
//! residual connection from layer 3's output.

use crate::lstm::{Lstm, LstmCache};
use crate::ops::{film, film_backward, relu, relu_backward, Conv2d, ConvCache, Linear};
use crate::tensor::{Scalar, Tensor};

pub const NUM_FILM_LAYERS: usize = 5;

/// Weights of the FiLM-LSTM trunk.
#[derive(Debug, Clone)]
pub struct FilmLstmTrunk<F: Scalar> {
    pub lstm: Lstm<F>,
    /// Five convolutions: (8x8, c1, VALID, stride 8), (3x3, c2, VALID),
    /// then three 3x3 SAME layers of trunk width.
    pub convs: Vec<Conv2d<F>>,
    pub gamma_proj: Vec<Linear<F>>,
    pub beta_proj: Vec<Linear<F>>,
}

/// Forward trace kept for the backward pass.
#[derive(Debug, Clone)]
pub struct FilmLstmEval<F: Scalar> {
    lstm_cache: LstmCache<F>,
    h_lstm: Vec<F>,
    gammas: Vec<Vec<F>>,
    conv_caches: Vec<ConvCache<F>>,
    /// Pre-FiLM convolution outputs.
    zs: Vec<Tensor<F>>,
    /// Post-FiLM, pre-ReLU activations.
    pre_relus: Vec<Tensor<F>>,
    /// Layer outputs h_1..h_5.
    hs: Vec<Tensor<F>>,
}

impl<F: Scalar> FilmLstmEval<F> {
    /// Final feature map `h_5`.
    pub fn out(&self) -> &Tensor<F> {
        self.hs.last().expect("five layers evaluated")
    }
}

impl<F: Scalar> FilmLstmTrunk<F> {
    pub fn new(vocab: usize, hidden: usize, in_c: usize, c1: usize, c2: usize, trunk_c: usize) -> Self {
        let convs = vec![
            Conv2d::new(8, 8, in_c, c1, 8, 0, false),
            Conv2d::new(3, 3, c1, c2, 1, 0, false),
            Conv2d::same(3, c2, trunk_c, false),
            Conv2d::same(3, trunk_c, trunk_c, false),
            Conv2d::same(3, trunk_c, trunk_c, false),
        ];
        let widths = [c1, c2, trunk_c, trunk_c, trunk_c];
        FilmLstmTrunk {
            lstm: Lstm::new(vocab, hidden),
            convs,
            gamma_proj: widths.iter().map(|&w| Linear::new(hidden, w, true)).collect(),
            beta_proj: widths.iter().map(|&w| Linear::new(hidden, w, true)).collect(),
        }
    }

    pub fn vocab(&self) -> usize {
        self.lstm.input_width()
    }

    fn one_hot(&self, id: usize) -> Vec<F> {
        let v = self.vocab();
        assert!(id < v, "token id {} outside vocabulary of {}", id, v);
        let mut x = vec![F::ZERO; v];
        x[id] = F::ONE;
        x
    }

    pub fn forward(&self, tokens: &[usize], image: &Tensor<F>) -> FilmLstmEval<F> {
        assert!(!tokens.is_empty(), "token sequence must be non-empty");
        let xs: Vec<Vec<F>> = tokens.iter().map(|&t| self.one_hot(t)).collect();
        let (h_lstm, lstm_cache) = self.lstm.forward(&xs);

        let mut gammas = Vec::with_capacity(NUM_FILM_LAYERS);
        let mut betas = Vec::with_capacity(NUM_FILM_LAYERS);
        for k in 0..NUM_FILM_LAYERS {
            gammas.push(self.gamma_proj[k].forward(&h_lstm));
            betas.push(self.beta_proj[k].forward(&h_lstm));
        }
        let betas_for_eval = betas;

        let mut conv_caches = Vec::with_capacity(NUM_FILM_LAYERS);
        let mut zs = Vec::with_capacity(NUM_FILM_LAYERS);
        let mut pre_relus = Vec::with_capacity(NUM_FILM_LAYERS);
        let mut hs: Vec<Tensor<F>> = Vec::with_capacity(NUM_FILM_LAYERS);
        for k in 0..NUM_FILM_LAYERS {
            let input = if k == 0 {
                image.clone()
            } else if k == 4 {
                // Residual: layer 5 reads h_4 + h_3.
                let mut t = hs[3].clone();
                t.add_assign(&hs[2]);
                t
            } else {
                hs[k - 1].clone()
            };
            let (z, cache) = self.convs[k].forward(&input);
            let pre = film(&z, &gammas[k], &betas_for_eval[k]);
            let h = relu(&pre);
            conv_caches.push(cache);
            zs.push(z);
            pre_relus.push(pre);
            hs.push(h);
        }

        FilmLstmEval {
            lstm_cache,
            h_lstm,
            gammas,
            conv_caches,
            zs,
            pre_relus,
            hs,
        }
    }

    /// Backward from dL/dh_5; accumulates into `grads`, returns dL/dimage.
    pub fn backward(
        &self,
        eval: &FilmLstmEval<F>,
        dout: &Tensor<F>,
        grads: &mut FilmLstmTrunk<F>,
    ) -> Tensor<F> {
        let hidden = self.lstm.hidden_width();
        let mut dh_lstm = vec![F::ZERO; hidden];
        // Accumulated gradients on each layer output h_k.
        let mut dhs: Vec<Tensor<F>> = eval.hs.iter().map(|h| h.zeros_like()).collect();
        dhs[4] = dout.clone();
        let mut dimage = None;

        for k in (0..NUM_FILM_LAYERS).rev() {
            let dpre = relu_backward(&eval.pre_relus[k], &dhs[k]);
            let width = eval.gammas[k].len();
            let mut dgamma = vec![F::ZERO; width];
            let mut dbeta = vec![F::ZERO; width];
            let dz = film_backward(&eval.zs[k], &eval.gammas[k], &dpre, &mut dgamma, &mut dbeta);
            let gp = &mut grads.gamma_proj[k];
            let mut acc = self.gamma_proj[k].backward(&eval.h_lstm, &dgamma, &mut gp.w, gp.b.as_mut());
            for (a, b) in dh_lstm.iter_mut().zip(&acc) {
                *a += *b;
            }
            let bp = &mut grads.beta_proj[k];
            acc = self.beta_proj[k].backward(&eval.h_lstm, &dbeta, &mut bp.w, bp.b.as_mut());
            for (a, b) in dh_lstm.iter_mut().zip(&acc) {
                *a += *b;
            }
            let dinput = self.convs[k].backward(&eval.conv_caches[k], &dz, &mut grads.convs[k].w, None);
            if k == 0 {
                dimage = Some(dinput);
            } else if k == 4 {
                // The residual sum routes this gradient to both h_4 and h_3.
                dhs[3].add_assign(&dinput);
                dhs[2].add_assign(&dinput);
            } else {
                dhs[k - 1].add_assign(&dinput);
            }
        }

        self.lstm.backward(&eval.lstm_cache, &dh_lstm, &mut grads.lstm);
        dimage.expect("layer 0 reached")
    }
}
