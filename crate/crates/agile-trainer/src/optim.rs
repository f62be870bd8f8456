//! Shared RMSProp with global gradient-norm clipping.

use neural_substrate::{ParamKind, Scalar, Tensor};

use crate::config::OptimConfig;

/// RMSProp without momentum. The squared-gradient accumulator is created
/// lazily on the first step and afterwards must always see the same
/// parameter traversal (same names, same shapes, same order).
///
/// One step, per element: `m <- decay * m + (1 - decay) * g^2` followed by
/// `p <- p - lr * g / sqrt(m + epsilon)`, where `g` is the gradient after
/// the whole gradient set has been rescaled to global norm at most `clip`.
#[derive(Debug, Clone)]
pub struct RmsProp<F: Scalar> {
    pub cfg: OptimConfig,
    accum: Vec<(String, Tensor<F>)>,
}

impl<F: Scalar> RmsProp<F> {
    pub fn new(cfg: OptimConfig) -> Self {
        RmsProp { cfg, accum: Vec::new() }
    }

    /// Applies one update and returns the pre-clip global gradient norm.
    pub fn step(
        &mut self,
        mut params: Vec<(String, &mut Tensor<F>, ParamKind)>,
        grads: Vec<(String, &mut Tensor<F>, ParamKind)>,
    ) -> f64 {
        assert_eq!(params.len(), grads.len(), "parameter and gradient traversals differ");
        if self.accum.is_empty() {
            self.accum = params
                .iter()
                .map(|(name, t, _)| (name.clone(), t.zeros_like()))
                .collect();
        }
        assert_eq!(self.accum.len(), params.len(), "optimizer bound to a different model");

        let norm = grads
            .iter()
            .map(|(_, g, _)| g.sum_sq_f64())
            .sum::<f64>()
            .sqrt();
        let scale = if norm > self.cfg.clip { self.cfg.clip / norm } else { 1.0 };

        let scale_f = F::from_f64(scale);
        let lr = F::from_f64(self.cfg.lr);
        let decay = F::from_f64(self.cfg.decay);
        let one_minus_decay = F::from_f64(1.0 - self.cfg.decay);
        let eps = F::from_f64(self.cfg.epsilon);

        for (((p_name, p, _), (g_name, g, _)), (m_name, m)) in
            params.iter_mut().zip(grads.iter()).zip(self.accum.iter_mut())
        {
            assert_eq!(p_name, g_name, "traversal order mismatch");
            assert_eq!(p_name, m_name, "optimizer state mismatch");
            assert_eq!(p.shape(), g.shape(), "gradient shape mismatch for {p_name}");
            let (pd, gd, md) = (p.data_mut(), g.data(), m.data_mut());
            for i in 0..pd.len() {
                let gi = gd[i] * scale_f;
                md[i] = decay * md[i] + one_minus_decay * gi * gi;
                pd[i] -= lr * gi / (md[i] + eps).sqrt();
            }
        }
        norm
    }
}
