//! Complete policy and reward-model networks: trunk dispatch, heads,
//! parameter traversal, initialization, and column-norm clipping.
//!
//! The policy and the reward model share architecture but never storage;
//! `ParamSet` keeps them in disjoint fields.

use instruction_lang::{tokenize, Instruction, RelInstruction, VOCAB};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::filmlstm::{FilmLstmEval, FilmLstmTrunk};
use crate::nmn::{NmnEval, NmnTrunk};
use crate::ops::{
    concat_channels, maxpool_global, maxpool_global_backward, relu, relu_backward, relu_vec,
    relu_vec_backward, sigmoid, softmax, split_channels, Conv2d, ConvCache, Linear,
};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("NMN trunks support relation instructions only")]
    NmnUnsupported,
}

/// Which trunk processes the instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrunkKind {
    Nmn,
    FilmLstm,
}

impl TrunkKind {
    pub fn name(self) -> &'static str {
        match self {
            TrunkKind::Nmn => "nmn",
            TrunkKind::FilmLstm => "film-lstm",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "nmn" => Some(TrunkKind::Nmn),
            "film-lstm" => Some(TrunkKind::FilmLstm),
            _ => None,
        }
    }
}

/// Architecture hyperparameters. `Default` is the full-scale geometry;
/// tests and desk-scale training shrink channel widths, never structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub trunk: TrunkKind,
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    /// Stem / FiLM-LSTM first-layer channels.
    pub stem_c1: usize,
    /// FiLM-LSTM second-layer channels.
    pub lstm_c2: usize,
    /// Trunk output channels (NMN module width).
    pub trunk_c: usize,
    /// MLP hidden width; also the LSTM state width.
    pub hidden: usize,
    pub actions: usize,
    pub vocab: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            trunk: TrunkKind::Nmn,
            in_h: gridlu_env::IMAGE_HEIGHT,
            in_w: gridlu_env::IMAGE_WIDTH,
            in_c: 3,
            stem_c1: 16,
            lstm_c2: 32,
            trunk_c: 64,
            hidden: 100,
            actions: 6,
            vocab: VOCAB.len(),
        }
    }
}

/// Tags driving initialization and norm clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Weight matrix (conv kernels, linear and LSTM weights): truncated
    /// normal init, column-norm clipped in the reward model.
    Weight,
    /// Zero-initialized bias vector.
    Bias,
    /// Per-token FiLM coefficient table: zero-initialized, never clipped.
    Film,
}

/// Instruction-conditioned trunk producing a `[H', W', trunk_c]` map.
#[derive(Debug, Clone)]
pub enum Trunk<F: Scalar> {
    Nmn(NmnTrunk<F>),
    FilmLstm(FilmLstmTrunk<F>),
}

#[derive(Debug, Clone)]
pub enum TrunkEval<F: Scalar> {
    Nmn(NmnEval<F>),
    FilmLstm(FilmLstmEval<F>),
}

impl<F: Scalar> TrunkEval<F> {
    pub fn out(&self) -> &Tensor<F> {
        match self {
            TrunkEval::Nmn(e) => e.out(),
            TrunkEval::FilmLstm(e) => e.out(),
        }
    }

    /// NMN stem output (needed by the policy merge path).
    fn stem(&self) -> Option<&Tensor<F>> {
        match self {
            TrunkEval::Nmn(e) => Some(&e.stem.h),
            TrunkEval::FilmLstm(_) => None,
        }
    }
}

impl<F: Scalar> Trunk<F> {
    fn new(cfg: &ModelConfig) -> Self {
        match cfg.trunk {
            TrunkKind::Nmn => Trunk::Nmn(NmnTrunk::new(cfg.in_c, cfg.stem_c1, cfg.trunk_c)),
            TrunkKind::FilmLstm => Trunk::FilmLstm(FilmLstmTrunk::new(
                cfg.vocab,
                cfg.hidden,
                cfg.in_c,
                cfg.stem_c1,
                cfg.lstm_c2,
                cfg.trunk_c,
            )),
        }
    }

    pub fn forward(&self, instr: &Instruction, image: &Tensor<F>) -> Result<TrunkEval<F>, ModelError> {
        match self {
            Trunk::Nmn(t) => match instr {
                Instruction::Relation(r) => Ok(TrunkEval::Nmn(t.forward(r, image))),
                Instruction::Arrangement(_) => Err(ModelError::NmnUnsupported),
            },
            Trunk::FilmLstm(t) => Ok(TrunkEval::FilmLstm(t.forward(&tokenize(instr), image))),
        }
    }

    /// Forward for a relation instruction without the enum wrapper.
    pub fn forward_relation(&self, instr: &RelInstruction, image: &Tensor<F>) -> TrunkEval<F> {
        match self {
            Trunk::Nmn(t) => TrunkEval::Nmn(t.forward(instr, image)),
            Trunk::FilmLstm(t) => TrunkEval::FilmLstm(
                t.forward(&tokenize(&Instruction::Relation(*instr)), image),
            ),
        }
    }

    fn backward(
        &self,
        eval: &TrunkEval<F>,
        dout: &Tensor<F>,
        dstem_extra: Option<&Tensor<F>>,
        grads: &mut Trunk<F>,
    ) -> Tensor<F> {
        match (self, eval, grads) {
            (Trunk::Nmn(t), TrunkEval::Nmn(e), Trunk::Nmn(g)) => {
                t.backward(e, dout, dstem_extra, g)
            }
            (Trunk::FilmLstm(t), TrunkEval::FilmLstm(e), Trunk::FilmLstm(g)) => {
                assert!(dstem_extra.is_none(), "no merge path in FiLM-LSTM");
                t.backward(e, dout, g)
            }
            _ => panic!("trunk/eval/grads kind mismatch"),
        }
    }

}

/// Named tensors of an NMN trunk (exposed for verification tooling).
pub fn nmn_tensors_mut<F: Scalar>(t: &mut NmnTrunk<F>) -> Vec<(String, &mut Tensor<F>, ParamKind)> {
    let mut v: Vec<(String, &mut Tensor<F>, ParamKind)> = Vec::new();
    v.push(("nmn.conv1.w".into(), &mut t.conv1.w, ParamKind::Weight));
    v.push(("nmn.conv1.b".into(), t.conv1.b.as_mut().unwrap(), ParamKind::Bias));
    v.push(("nmn.conv2.w".into(), &mut t.conv2.w, ParamKind::Weight));
    v.push(("nmn.conv2.b".into(), t.conv2.b.as_mut().unwrap(), ParamKind::Bias));
    v.push(("nmn.module.w".into(), &mut t.module_conv.w, ParamKind::Weight));
    v.push(("nmn.gamma".into(), &mut t.gamma, ParamKind::Film));
    v.push(("nmn.beta".into(), &mut t.beta, ParamKind::Film));
    v
}

/// Named tensors of a FiLM-LSTM trunk (exposed for verification tooling).
pub fn film_lstm_tensors_mut<F: Scalar>(
    t: &mut FilmLstmTrunk<F>,
) -> Vec<(String, &mut Tensor<F>, ParamKind)> {
    let mut v: Vec<(String, &mut Tensor<F>, ParamKind)> = Vec::new();
    v.push(("lstm.w_x".into(), &mut t.lstm.w_x, ParamKind::Weight));
    v.push(("lstm.w_h".into(), &mut t.lstm.w_h, ParamKind::Weight));
    v.push(("lstm.b".into(), &mut t.lstm.b, ParamKind::Bias));
    for (k, (conv, (gp, bp))) in t
        .convs
        .iter_mut()
        .zip(t.gamma_proj.iter_mut().zip(t.beta_proj.iter_mut()))
        .enumerate()
    {
        let n = k + 1;
        v.push((format!("conv{}.w", n), &mut conv.w, ParamKind::Weight));
        v.push((format!("film{}.gamma.w", n), &mut gp.w, ParamKind::Weight));
        v.push((format!("film{}.gamma.b", n), gp.b.as_mut().unwrap(), ParamKind::Bias));
        v.push((format!("film{}.beta.w", n), &mut bp.w, ParamKind::Weight));
        v.push((format!("film{}.beta.b", n), bp.b.as_mut().unwrap(), ParamKind::Bias));
    }
    v
}

fn trunk_tensors_mut<F: Scalar>(t: &mut Trunk<F>) -> Vec<(String, &mut Tensor<F>, ParamKind)> {
    match t {
        Trunk::Nmn(t) => nmn_tensors_mut(t),
        Trunk::FilmLstm(t) => film_lstm_tensors_mut(t),
    }
}

/// Policy network θ: trunk, merge convolution (NMN only), shared MLP
/// hidden layer, and the action, baseline, and reward-prediction heads.
#[derive(Debug, Clone)]
pub struct PolicyParams<F: Scalar> {
    pub cfg: ModelConfig,
    pub trunk: Trunk<F>,
    pub merge: Option<Conv2d<F>>,
    pub hidden: Linear<F>,
    pub pi: Linear<F>,
    pub baseline: Linear<F>,
    pub rp: Linear<F>,
}

/// Reward model φ: trunk plus the sigmoid scoring head. The output layer
/// is a bias-free inner product.
#[derive(Debug, Clone)]
pub struct DiscParams<F: Scalar> {
    pub cfg: ModelConfig,
    pub trunk: Trunk<F>,
    pub hidden: Linear<F>,
    pub out: Linear<F>,
}

impl<F: Scalar> PolicyParams<F> {
    pub fn new(cfg: &ModelConfig) -> Self {
        let merge = match cfg.trunk {
            TrunkKind::Nmn => Some(Conv2d::same(3, 2 * cfg.trunk_c, cfg.trunk_c, true)),
            TrunkKind::FilmLstm => None,
        };
        PolicyParams {
            cfg: cfg.clone(),
            trunk: Trunk::new(cfg),
            merge,
            hidden: Linear::new(cfg.trunk_c, cfg.hidden, true),
            pi: Linear::new(cfg.hidden, cfg.actions, true),
            baseline: Linear::new(cfg.hidden, 1, true),
            rp: Linear::new(cfg.trunk_c, 2, true),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t, _) in z.tensors_mut() {
            *t = t.zeros_like();
        }
        z
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>, ParamKind)> {
        let mut v = trunk_tensors_mut(&mut self.trunk);
        if let Some(m) = &mut self.merge {
            v.push(("merge.w".into(), &mut m.w, ParamKind::Weight));
            v.push(("merge.b".into(), m.b.as_mut().unwrap(), ParamKind::Bias));
        }
        v.push(("hidden.w".into(), &mut self.hidden.w, ParamKind::Weight));
        v.push(("hidden.b".into(), self.hidden.b.as_mut().unwrap(), ParamKind::Bias));
        v.push(("pi.w".into(), &mut self.pi.w, ParamKind::Weight));
        v.push(("pi.b".into(), self.pi.b.as_mut().unwrap(), ParamKind::Bias));
        v.push(("baseline.w".into(), &mut self.baseline.w, ParamKind::Weight));
        v.push(("baseline.b".into(), self.baseline.b.as_mut().unwrap(), ParamKind::Bias));
        v.push(("rp.w".into(), &mut self.rp.w, ParamKind::Weight));
        v.push(("rp.b".into(), self.rp.b.as_mut().unwrap(), ParamKind::Bias));
        v
    }

    pub fn forward(&self, instr: &Instruction, image: &Tensor<F>) -> Result<PolicyEval<F>, ModelError> {
        let trunk_eval = self.trunk.forward(instr, image)?;
        Ok(self.heads_forward(trunk_eval))
    }

    pub fn forward_relation(&self, instr: &RelInstruction, image: &Tensor<F>) -> PolicyEval<F> {
        self.heads_forward(self.trunk.forward_relation(instr, image))
    }

    fn heads_forward(&self, trunk_eval: TrunkEval<F>) -> PolicyEval<F> {
        // Map fed to pooling: merge(ReLU) of [h_trunk; h_stem] for NMN,
        // the trunk output itself for FiLM-LSTM.
        let merge_eval = self.merge.as_ref().map(|m| {
            let stem = trunk_eval.stem().expect("merge implies NMN trunk");
            let joint = concat_channels(trunk_eval.out(), stem);
            let (z, cache) = m.forward(&joint);
            let h = relu(&z);
            MergeEval { cache, z, h }
        });
        let map = merge_eval
            .as_ref()
            .map(|m| &m.h)
            .unwrap_or_else(|| trunk_eval.out());
        let map_shape = map.shape().to_vec();
        let (pooled, argmax) = maxpool_global(map);
        let hidden_pre = self.hidden.forward(&pooled);
        let hidden_act = relu_vec(&hidden_pre);
        let logits = self.pi.forward(&hidden_act);
        let probs = softmax(&logits);
        let value = self.baseline.forward(&hidden_act)[0];
        let rp_logits = self.rp.forward(&pooled);
        let rp_probs = softmax(&rp_logits);
        PolicyEval {
            trunk: trunk_eval,
            merge: merge_eval,
            map_shape,
            pooled,
            argmax,
            hidden_pre,
            hidden_act,
            probs,
            value,
            rp_probs,
        }
    }

    /// Backward from head-level gradients (all in pre-softmax / raw-output
    /// space). Accumulates into `grads`; returns dL/dimage.
    pub fn backward(
        &self,
        eval: &PolicyEval<F>,
        dlogits: &[F],
        dvalue: F,
        drp_logits: Option<&[F; 2]>,
        grads: &mut PolicyParams<F>,
    ) -> Tensor<F> {
        assert_eq!(dlogits.len(), self.cfg.actions);
        let mut dhidden_act = self.pi.backward(
            &eval.hidden_act,
            dlogits,
            &mut grads.pi.w,
            grads.pi.b.as_mut(),
        );
        let dvb = self.baseline.backward(
            &eval.hidden_act,
            &[dvalue],
            &mut grads.baseline.w,
            grads.baseline.b.as_mut(),
        );
        for (a, b) in dhidden_act.iter_mut().zip(&dvb) {
            *a += *b;
        }
        let dhidden_pre = relu_vec_backward(&eval.hidden_pre, &dhidden_act);
        let mut dpooled = self.hidden.backward(
            &eval.pooled,
            &dhidden_pre,
            &mut grads.hidden.w,
            grads.hidden.b.as_mut(),
        );
        if let Some(drp) = drp_logits {
            let drp_pooled = self.rp.backward(
                &eval.pooled,
                drp.as_slice(),
                &mut grads.rp.w,
                grads.rp.b.as_mut(),
            );
            for (a, b) in dpooled.iter_mut().zip(&drp_pooled) {
                *a += *b;
            }
        }
        let dmap = maxpool_global_backward(&eval.map_shape, &eval.argmax, &dpooled);

        match (&eval.merge, &self.merge) {
            (Some(me), Some(m)) => {
                let dz = relu_backward(&me.z, &dmap);
                let gm = grads.merge.as_mut().unwrap();
                let djoint = m.backward(&me.cache, &dz, &mut gm.w, gm.b.as_mut());
                let (dtrunk, dstem) = split_channels(&djoint, self.cfg.trunk_c);
                self.trunk
                    .backward(&eval.trunk, &dtrunk, Some(&dstem), &mut grads.trunk)
            }
            (None, None) => self
                .trunk
                .backward(&eval.trunk, &dmap, None, &mut grads.trunk),
            _ => panic!("merge eval/weights mismatch"),
        }
    }
}

/// Merge-convolution activations kept for backward.
#[derive(Debug, Clone)]
struct MergeEval<F: Scalar> {
    cache: ConvCache<F>,
    z: Tensor<F>,
    h: Tensor<F>,
}

/// Policy forward trace: public outputs plus the cache for backward.
#[derive(Debug, Clone)]
pub struct PolicyEval<F: Scalar> {
    trunk: TrunkEval<F>,
    merge: Option<MergeEval<F>>,
    map_shape: Vec<usize>,
    pooled: Vec<F>,
    argmax: Vec<usize>,
    hidden_pre: Vec<F>,
    hidden_act: Vec<F>,
    /// Action distribution.
    pub probs: Vec<F>,
    /// Baseline value estimate.
    pub value: F,
    /// Reward-prediction distribution, class order (positive, zero).
    pub rp_probs: Vec<F>,
}

impl<F: Scalar> DiscParams<F> {
    pub fn new(cfg: &ModelConfig) -> Self {
        DiscParams {
            cfg: cfg.clone(),
            trunk: Trunk::new(cfg),
            hidden: Linear::new(cfg.trunk_c, cfg.hidden, true),
            out: Linear::new(cfg.hidden, 1, false),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t, _) in z.tensors_mut() {
            *t = t.zeros_like();
        }
        z
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>, ParamKind)> {
        let mut v = trunk_tensors_mut(&mut self.trunk);
        v.push(("hidden.w".into(), &mut self.hidden.w, ParamKind::Weight));
        v.push(("hidden.b".into(), self.hidden.b.as_mut().unwrap(), ParamKind::Bias));
        v.push(("out.w".into(), &mut self.out.w, ParamKind::Weight));
        v
    }

    pub fn forward(&self, instr: &Instruction, image: &Tensor<F>) -> Result<DiscEval<F>, ModelError> {
        let trunk_eval = self.trunk.forward(instr, image)?;
        Ok(self.heads_forward(trunk_eval))
    }

    pub fn forward_relation(&self, instr: &RelInstruction, image: &Tensor<F>) -> DiscEval<F> {
        self.heads_forward(self.trunk.forward_relation(instr, image))
    }

    fn heads_forward(&self, trunk_eval: TrunkEval<F>) -> DiscEval<F> {
        let map = trunk_eval.out();
        let map_shape = map.shape().to_vec();
        let (pooled, argmax) = maxpool_global(map);
        let hidden_pre = self.hidden.forward(&pooled);
        let hidden_act = relu_vec(&hidden_pre);
        let logit = self.out.forward(&hidden_act)[0];
        let p = sigmoid(logit);
        DiscEval {
            trunk: trunk_eval,
            map_shape,
            pooled,
            argmax,
            hidden_pre,
            hidden_act,
            logit,
            p,
        }
    }

    /// Backward from dL/dlogit (pre-sigmoid). Accumulates into `grads`;
    /// returns dL/dimage.
    pub fn backward(&self, eval: &DiscEval<F>, dlogit: F, grads: &mut DiscParams<F>) -> Tensor<F> {
        let dhidden_act = self.out.backward(
            &eval.hidden_act,
            &[dlogit],
            &mut grads.out.w,
            None,
        );
        let dhidden_pre = relu_vec_backward(&eval.hidden_pre, &dhidden_act);
        let dpooled = self.hidden.backward(
            &eval.pooled,
            &dhidden_pre,
            &mut grads.hidden.w,
            grads.hidden.b.as_mut(),
        );
        let dmap = maxpool_global_backward(&eval.map_shape, &eval.argmax, &dpooled);
        self.trunk
            .backward(&eval.trunk, &dmap, None, &mut grads.trunk)
    }
}

/// Discriminator forward trace.
#[derive(Debug, Clone)]
pub struct DiscEval<F: Scalar> {
    trunk: TrunkEval<F>,
    map_shape: Vec<usize>,
    pooled: Vec<F>,
    argmax: Vec<usize>,
    hidden_pre: Vec<F>,
    hidden_act: Vec<F>,
    /// Pre-sigmoid score.
    pub logit: F,
    /// `D_φ(c, s)`, strictly inside (0, 1).
    pub p: F,
}

/// Policy θ and reward-model φ with disjoint storage.
#[derive(Debug, Clone)]
pub struct ParamSet<F: Scalar> {
    pub policy: PolicyParams<F>,
    pub disc: DiscParams<F>,
}

impl<F: Scalar> ParamSet<F> {
    pub fn new(policy_cfg: &ModelConfig, disc_cfg: &ModelConfig) -> Self {
        ParamSet {
            policy: PolicyParams::new(policy_cfg),
            disc: DiscParams::new(disc_cfg),
        }
    }

    /// All tensors with stable, prefixed names (checkpoint order).
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>, ParamKind)> {
        let mut v: Vec<(String, &mut Tensor<F>, ParamKind)> = Vec::new();
        for (n, t, k) in self.policy.tensors_mut() {
            v.push((format!("policy.{}", n), t, k));
        }
        for (n, t, k) in self.disc.tensors_mut() {
            v.push((format!("disc.{}", n), t, k));
        }
        v
    }
}

/// Samples from a normal truncated to ±2σ by resampling.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let dist = Normal::new(0.0, sigma).expect("positive sigma");
    loop {
        let x = dist.sample(rng);
        if x.abs() <= 2.0 * sigma {
            return x;
        }
    }
}

fn init_tensors<F: Scalar, R: Rng + ?Sized>(
    tensors: Vec<(String, &mut Tensor<F>, ParamKind)>,
    rng: &mut R,
) {
    for (_, t, kind) in tensors {
        match kind {
            ParamKind::Weight => {
                let shape = t.shape().to_vec();
                let fan_in: usize = shape[..shape.len() - 1].iter().product();
                let sigma = 1.0 / (fan_in as f64).sqrt();
                for v in t.data_mut() {
                    *v = F::from_f64(truncated_normal(rng, sigma));
                }
            }
            ParamKind::Bias | ParamKind::Film => {
                for v in t.data_mut() {
                    *v = F::ZERO;
                }
            }
        }
    }
}

/// Builds θ and φ with truncated-normal weight matrices (σ = 1/√fan_in,
/// resampled beyond ±2σ) and zero biases and FiLM tables.
pub fn init_params<F: Scalar, R: Rng + ?Sized>(
    policy_cfg: &ModelConfig,
    disc_cfg: &ModelConfig,
    rng: &mut R,
) -> ParamSet<F> {
    let mut set = ParamSet::new(policy_cfg, disc_cfg);
    init_tensors(set.policy.tensors_mut(), rng);
    init_tensors(set.disc.tensors_mut(), rng);
    set
}

/// Initializes a policy alone (ground-truth RL needs no reward model).
pub fn init_policy<F: Scalar, R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> PolicyParams<F> {
    let mut p = PolicyParams::new(cfg);
    init_tensors(p.tensors_mut(), rng);
    p
}

/// Initializes a reward model alone.
pub fn init_disc<F: Scalar, R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> DiscParams<F> {
    let mut d = DiscParams::new(cfg);
    init_tensors(d.tensors_mut(), rng);
    d
}

/// Rescales every weight-matrix column (each unit's incoming weights,
/// kernels flattened to `[fan_in, out]`) to L2 norm at most 1 by the
/// factor `min(1, 1/‖w_u‖₂)`.
///
/// Columns already inside a small guard band are left untouched, which
/// keeps the bound within 1 + 1e-6 and makes the operation exactly
/// idempotent despite float rounding.
pub fn clip_column_norms<F: Scalar>(tensors: Vec<(String, &mut Tensor<F>, ParamKind)>) {
    for (_, t, kind) in tensors {
        if kind != ParamKind::Weight {
            continue;
        }
        let shape = t.shape().to_vec();
        let cols = *shape.last().unwrap();
        let rows: usize = shape[..shape.len() - 1].iter().product();
        let data = t.data_mut();
        for u in 0..cols {
            let mut sumsq = 0.0f64;
            for r in 0..rows {
                let v = data[r * cols + u].to_f64();
                sumsq += v * v;
            }
            if sumsq > 1.0 + 1e-6 {
                let scale = F::from_f64(1.0 / sumsq.sqrt());
                for r in 0..rows {
                    data[r * cols + u] *= scale;
                }
            }
        }
    }
}
