//! LSTM over a token sequence, with full backpropagation through time.
//!
//! Gate order in the fused weight matrices is (input, forget, candidate,
//! output). Tokens enter as one-hot vectors over the instruction
//! vocabulary; only the final hidden state is consumed downstream.

use crate::ops::sigmoid;
use crate::tensor::{gemm_acc, Scalar, Tensor};

/// LSTM weights: `w_x [IN, 4H]`, `w_h [H, 4H]`, `b [4H]`.
#[derive(Debug, Clone)]
pub struct Lstm<F: Scalar> {
    pub w_x: Tensor<F>,
    pub w_h: Tensor<F>,
    pub b: Tensor<F>,
}

/// Per-step values retained for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache<F: Scalar> {
    xs: Vec<Vec<F>>,
    // Post-nonlinearity gate activations per step: i, f, g, o.
    gates: Vec<[Vec<F>; 4]>,
    cells: Vec<Vec<F>>,
    hiddens: Vec<Vec<F>>,
}

impl<F: Scalar> Lstm<F> {
    pub fn new(n_in: usize, hidden: usize) -> Self {
        Lstm {
            w_x: Tensor::zeros(&[n_in, 4 * hidden]),
            w_h: Tensor::zeros(&[hidden, 4 * hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn input_width(&self) -> usize {
        self.w_x.shape()[0]
    }

    pub fn hidden_width(&self) -> usize {
        self.w_h.shape()[0]
    }

    /// Runs the sequence and returns the final hidden state.
    pub fn forward(&self, xs: &[Vec<F>]) -> (Vec<F>, LstmCache<F>) {
        assert!(!xs.is_empty(), "LSTM input sequence must be non-empty");
        let h = self.hidden_width();
        let n_in = self.input_width();
        let mut cache = LstmCache {
            xs: xs.to_vec(),
            gates: Vec::with_capacity(xs.len()),
            cells: Vec::with_capacity(xs.len()),
            hiddens: Vec::with_capacity(xs.len()),
        };
        let mut h_prev = vec![F::ZERO; h];
        let mut c_prev = vec![F::ZERO; h];
        for x in xs {
            assert_eq!(x.len(), n_in, "LSTM input width");
            let mut z = self.b.data().to_vec();
            gemm_acc(1, n_in, 4 * h, x, n_in as isize, 1, self.w_x.data(), 4 * h as isize, 1, F::ONE, &mut z);
            gemm_acc(1, h, 4 * h, &h_prev, h as isize, 1, self.w_h.data(), 4 * h as isize, 1, F::ONE, &mut z);
            let i: Vec<F> = z[..h].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<F> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<F> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
            let o: Vec<F> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
            let mut c_t = vec![F::ZERO; h];
            let mut h_t = vec![F::ZERO; h];
            for j in 0..h {
                c_t[j] = f[j] * c_prev[j] + i[j] * g[j];
                h_t[j] = o[j] * c_t[j].tanh();
            }
            cache.gates.push([i, f, g, o]);
            cache.cells.push(c_t.clone());
            cache.hiddens.push(h_t.clone());
            c_prev = c_t;
            h_prev = h_t;
        }
        (h_prev, cache)
    }

    /// BPTT from a gradient on the final hidden state. `grads` is a
    /// same-shape accumulator struct.
    pub fn backward(&self, cache: &LstmCache<F>, dh_final: &[F], grads: &mut Lstm<F>) {
        let h = self.hidden_width();
        assert_eq!(dh_final.len(), h);
        let steps = cache.xs.len();
        let mut dh = dh_final.to_vec();
        let mut dc = vec![F::ZERO; h];
        for t in (0..steps).rev() {
            let [i, f, g, o] = &cache.gates[t];
            let c_t = &cache.cells[t];
            let c_prev: Vec<F> = if t == 0 {
                vec![F::ZERO; h]
            } else {
                cache.cells[t - 1].clone()
            };
            let h_prev: Vec<F> = if t == 0 {
                vec![F::ZERO; h]
            } else {
                cache.hiddens[t - 1].clone()
            };

            // dz holds pre-nonlinearity gate gradients in fused order.
            let mut dz = vec![F::ZERO; 4 * h];
            for j in 0..h {
                let tanh_c = c_t[j].tanh();
                let do_j = dh[j] * tanh_c;
                let dc_j = dc[j] + dh[j] * o[j] * (F::ONE - tanh_c * tanh_c);
                let di_j = dc_j * g[j];
                let df_j = dc_j * c_prev[j];
                let dg_j = dc_j * i[j];
                dz[j] = di_j * i[j] * (F::ONE - i[j]);
                dz[h + j] = df_j * f[j] * (F::ONE - f[j]);
                dz[2 * h + j] = dg_j * (F::ONE - g[j] * g[j]);
                dz[3 * h + j] = do_j * o[j] * (F::ONE - o[j]);
                dc[j] = dc_j * f[j];
            }

            // Parameter gradients: dW_x += x ⊗ dz, dW_h += h_prev ⊗ dz, db += dz.
            let x = &cache.xs[t];
            let dwx = grads.w_x.data_mut();
            for (row, &xv) in x.iter().enumerate() {
                if xv == F::ZERO {
                    continue;
                }
                let dst = &mut dwx[row * 4 * h..(row + 1) * 4 * h];
                for (d, &dzv) in dst.iter_mut().zip(&dz) {
                    *d += xv * dzv;
                }
            }
            let dwh = grads.w_h.data_mut();
            for (row, &hv) in h_prev.iter().enumerate() {
                let dst = &mut dwh[row * 4 * h..(row + 1) * 4 * h];
                for (d, &dzv) in dst.iter_mut().zip(&dz) {
                    *d += hv * dzv;
                }
            }
            for (d, &dzv) in grads.b.data_mut().iter_mut().zip(&dz) {
                *d += dzv;
            }

            // dh_prev = dz · W_hᵀ, carried into the previous step.
            let mut dh_prev = vec![F::ZERO; h];
            gemm_acc(
                1,
                4 * h,
                h,
                &dz,
                4 * h as isize,
                1,
                self.w_h.data(),
                1,
                4 * h as isize,
                F::ZERO,
                &mut dh_prev,
            );
            dh = dh_prev;
        }
    }
}
