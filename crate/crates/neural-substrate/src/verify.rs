//! End-to-end gradient verification of every architectural component
//! against central finite differences at f64.
//!
//! Channel widths are reduced to keep finite differencing tractable; the
//! code paths are identical to full-scale models because every dimension
//! flows from `ModelConfig`. Used by the library tests and by the
//! command-line `verify` tool.

use gridlu_env::{ColorId, Shape};
use instruction_lang::{Descriptor, Operand, RelInstruction, Relation, VOCAB};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::filmlstm::FilmLstmTrunk;
use crate::gradcheck::{compare_grads, fd_gradient, get_flat, set_flat, GradCheckReport};
use crate::model::{
    film_lstm_tensors_mut, nmn_tensors_mut, DiscParams, ModelConfig, ParamKind, PolicyParams,
    TrunkKind,
};
use crate::nmn::{ModuleToken, NmnTrunk};
use crate::ops::{sigmoid_backward, softmax_backward};
use crate::tensor::Tensor;

/// One verified component with its finite-difference comparison.
#[derive(Debug, Clone)]
pub struct VerifyCase {
    pub name: String,
    pub report: GradCheckReport,
}

/// Reduced geometry: 32x32 two-channel images map to a 2x2 spatial grid,
/// so pooling, SAME modules, and the residual all stay non-trivial.
fn tiny_cfg(trunk: TrunkKind) -> ModelConfig {
    ModelConfig {
        trunk,
        in_h: 32,
        in_w: 32,
        in_c: 2,
        stem_c1: 3,
        lstm_c2: 4,
        trunk_c: 4,
        hidden: 5,
        actions: 4,
        vocab: VOCAB.len(),
    }
}

fn fill_tensors(tensors: Vec<(String, &mut Tensor<f64>, ParamKind)>, rng: &mut ChaCha8Rng) {
    for (_, t, _) in tensors {
        for v in t.data_mut() {
            *v = 0.6 * (rng.gen::<f64>() - 0.5);
        }
    }
}

fn fill_tensor(t: &mut Tensor<f64>, rng: &mut ChaCha8Rng) {
    for v in t.data_mut() {
        *v = rng.gen::<f64>();
    }
}

fn probe(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn red_circle_north_from_blue_rect() -> RelInstruction {
    RelInstruction::new(
        Relation::NorthFrom,
        Operand::Object(Descriptor::new(Some(ColorId::Red), Some(Shape::Circle)).unwrap()),
        Operand::Object(Descriptor::new(Some(ColorId::Blue), Some(Shape::Rect)).unwrap()),
    )
    .unwrap()
}

fn go_to_triangle() -> RelInstruction {
    RelInstruction::new(
        Relation::NorthFrom,
        Operand::Agent,
        Operand::Object(Descriptor::new(None, Some(Shape::Triangle)).unwrap()),
    )
    .unwrap()
}

/// Checks an NMN-trunk loss: analytic gradients over every trunk tensor
/// plus the image against finite differences of `loss`.
fn check_nmn_trunk<L, B>(name: &str, seed: u64, loss: L, backward: B) -> VerifyCase
where
    L: Fn(&NmnTrunk<f64>, &Tensor<f64>, &mut ChaCha8Rng) -> f64,
    B: Fn(&NmnTrunk<f64>, &Tensor<f64>, &mut ChaCha8Rng, &mut NmnTrunk<f64>) -> Tensor<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = tiny_cfg(TrunkKind::Nmn);
    let mut trunk: NmnTrunk<f64> = NmnTrunk::new(cfg.in_c, cfg.stem_c1, cfg.trunk_c);
    fill_tensors(nmn_tensors_mut(&mut trunk), &mut rng);
    let mut image = Tensor::zeros(&[cfg.in_h, cfg.in_w, cfg.in_c]);
    fill_tensor(&mut image, &mut rng);

    // The probe vector must be identical in the analytic and numeric
    // passes, so both receive a clone of the post-fill RNG.
    let mut grads = NmnTrunk::new(cfg.in_c, cfg.stem_c1, cfg.trunk_c);
    let dimage = backward(&trunk, &image, &mut rng.clone(), &mut grads);
    let mut analytic = get_flat(nmn_tensors_mut(&mut grads));
    analytic.extend(dimage.data());

    let base: Vec<f64> = get_flat(nmn_tensors_mut(&mut trunk))
        .into_iter()
        .chain(image.data().iter().copied())
        .collect();
    let n_params = base.len() - image.len();
    let numeric = fd_gradient(
        |flat: &[f64]| {
            let mut t2 = trunk.clone();
            set_flat(nmn_tensors_mut(&mut t2), &flat[..n_params]);
            let img = Tensor::from_vec(image.shape(), flat[n_params..].to_vec());
            loss(&t2, &img, &mut rng.clone())
        },
        &base,
    );
    VerifyCase {
        name: name.into(),
        report: compare_grads(&analytic, &numeric),
    }
}

/// Stem convnet alone: probe loss on `h_stem`.
pub fn verify_stem() -> VerifyCase {
    check_nmn_trunk(
        "nmn-stem",
        11,
        |t, img, rng| {
            let eval = t.stem_forward(img);
            dot(eval.h.data(), &probe(eval.h.len(), rng))
        },
        |t, img, rng, grads| {
            let eval = t.stem_forward(img);
            let p = probe(eval.h.len(), rng);
            let dh = Tensor::from_vec(eval.h.shape(), p);
            t.stem_backward(&eval, &dh, grads)
        },
    )
}

/// One module application (binary when `relation` holds, unary otherwise):
/// gradients over the shared convolution, both FiLM tables, and both
/// operand maps.
fn verify_module(name: &str, seed: u64, token: ModuleToken, binary: bool) -> VerifyCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = 4;
    let mut trunk: NmnTrunk<f64> = NmnTrunk::new(2, 3, c);
    fill_tensors(nmn_tensors_mut(&mut trunk), &mut rng);
    let mut h_l = Tensor::zeros(&[3, 3, c]);
    fill_tensor(&mut h_l, &mut rng);
    let mut h_r = Tensor::zeros(&[3, 3, c]);
    fill_tensor(&mut h_r, &mut rng);

    let trace = trunk.module_forward(token, &h_l, binary.then_some(&h_r));
    let p = probe(trace.out().len(), &mut rng.clone());
    let dout = Tensor::from_vec(trace.out().shape(), p.clone());
    let mut grads = NmnTrunk::new(2, 3, c);
    let (dl, dr) = trunk.module_backward(&trace, &dout, &mut grads);
    assert_eq!(dr.is_some(), binary, "unary modules have no right gradient");

    let mut analytic = Vec::new();
    analytic.extend_from_slice(grads.module_conv.w.data());
    analytic.extend_from_slice(grads.gamma.data());
    analytic.extend_from_slice(grads.beta.data());
    analytic.extend_from_slice(dl.data());
    if let Some(dr) = &dr {
        analytic.extend_from_slice(dr.data());
    }

    let mut base = Vec::new();
    base.extend_from_slice(trunk.module_conv.w.data());
    base.extend_from_slice(trunk.gamma.data());
    base.extend_from_slice(trunk.beta.data());
    base.extend_from_slice(h_l.data());
    if binary {
        base.extend_from_slice(h_r.data());
    }
    let (wn, gn, ln) = (trunk.module_conv.w.len(), trunk.gamma.len(), h_l.len());
    let numeric = fd_gradient(
        |flat: &[f64]| {
            let mut t2 = trunk.clone();
            t2.module_conv.w = Tensor::from_vec(trunk.module_conv.w.shape(), flat[..wn].to_vec());
            t2.gamma = Tensor::from_vec(trunk.gamma.shape(), flat[wn..wn + gn].to_vec());
            t2.beta = Tensor::from_vec(trunk.beta.shape(), flat[wn + gn..wn + 2 * gn].to_vec());
            let at = wn + 2 * gn;
            let hl = Tensor::from_vec(h_l.shape(), flat[at..at + ln].to_vec());
            let hr = binary.then(|| Tensor::from_vec(h_r.shape(), flat[at + ln..].to_vec()));
            let tr = t2.module_forward(token, &hl, hr.as_ref());
            dot(tr.out().data(), &p)
        },
        &base,
    );
    VerifyCase {
        name: name.into(),
        report: compare_grads(&analytic, &numeric),
    }
}

pub fn verify_module_binary() -> VerifyCase {
    verify_module("nmn-module-binary", 12, ModuleToken::Relation(Relation::EastFrom), true)
}

pub fn verify_module_unary() -> VerifyCase {
    verify_module("nmn-module-unary", 13, ModuleToken::Agent, false)
}

/// Full five-module composition ("red circle north from blue rect"):
/// two two-module descriptor chains joined by a binary relation root.
pub fn verify_nmn_composition() -> VerifyCase {
    let instr = red_circle_north_from_blue_rect();
    {
        let trunk: NmnTrunk<f64> = NmnTrunk::new(2, 3, 4);
        let image = Tensor::zeros(&[32, 32, 2]);
        let eval = trunk.forward(&instr, &image);
        assert_eq!(eval.module_count(), 5, "composition applies five modules");
        assert_eq!(eval.depth(), 3, "chains of two under a binary root");
    }
    check_nmn_trunk(
        "nmn-composition",
        14,
        move |t, img, rng| {
            let eval = t.forward(&instr, img);
            dot(eval.out().data(), &probe(eval.out().len(), rng))
        },
        move |t, img, rng, grads| {
            let eval = t.forward(&instr, img);
            let p = probe(eval.out().len(), rng);
            let dout = Tensor::from_vec(eval.out().shape(), p);
            t.backward(&eval, &dout, None, grads)
        },
    )
}

/// Go-to composition: the agent module feeds the relation root directly.
pub fn verify_nmn_goto() -> VerifyCase {
    let instr = go_to_triangle();
    {
        let trunk: NmnTrunk<f64> = NmnTrunk::new(2, 3, 4);
        let image = Tensor::zeros(&[32, 32, 2]);
        let eval = trunk.forward(&instr, &image);
        assert_eq!(eval.module_count(), 3, "agent, shape, relation");
        assert_eq!(eval.depth(), 2);
    }
    check_nmn_trunk(
        "nmn-goto",
        15,
        move |t, img, rng| {
            let eval = t.forward(&instr, img);
            dot(eval.out().data(), &probe(eval.out().len(), rng))
        },
        move |t, img, rng, grads| {
            let eval = t.forward(&instr, img);
            let p = probe(eval.out().len(), rng);
            let dout = Tensor::from_vec(eval.out().shape(), p);
            t.backward(&eval, &dout, None, grads)
        },
    )
}

/// FiLM-LSTM trunk: LSTM conditioning, five modulated convolutions, and
/// the layer-five residual, probed at the trunk output.
pub fn verify_film_lstm() -> VerifyCase {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cfg = tiny_cfg(TrunkKind::FilmLstm);
    let mut trunk: FilmLstmTrunk<f64> = FilmLstmTrunk::new(
        cfg.vocab,
        cfg.hidden,
        cfg.in_c,
        cfg.stem_c1,
        cfg.lstm_c2,
        cfg.trunk_c,
    );
    fill_tensors(film_lstm_tensors_mut(&mut trunk), &mut rng);
    let mut image = Tensor::zeros(&[cfg.in_h, cfg.in_w, cfg.in_c]);
    fill_tensor(&mut image, &mut rng);
    let tokens = instruction_lang::tokenize(&instruction_lang::Instruction::Relation(
        red_circle_north_from_blue_rect(),
    ));

    let eval = trunk.forward(&tokens, &image);
    let p = probe(eval.out().len(), &mut rng.clone());
    let dout = Tensor::from_vec(eval.out().shape(), p.clone());
    let mut grads = FilmLstmTrunk::new(
        cfg.vocab,
        cfg.hidden,
        cfg.in_c,
        cfg.stem_c1,
        cfg.lstm_c2,
        cfg.trunk_c,
    );
    let dimage = trunk.backward(&eval, &dout, &mut grads);
    let mut analytic = get_flat(film_lstm_tensors_mut(&mut grads));
    analytic.extend(dimage.data());

    let base: Vec<f64> = get_flat(film_lstm_tensors_mut(&mut trunk))
        .into_iter()
        .chain(image.data().iter().copied())
        .collect();
    let n_params = base.len() - image.len();
    let numeric = fd_gradient(
        |flat: &[f64]| {
            let mut t2 = trunk.clone();
            set_flat(film_lstm_tensors_mut(&mut t2), &flat[..n_params]);
            let img = Tensor::from_vec(image.shape(), flat[n_params..].to_vec());
            dot(t2.forward(&tokens, &img).out().data(), &p)
        },
        &base,
    );
    VerifyCase {
        name: "film-lstm".into(),
        report: compare_grads(&analytic, &numeric),
    }
}

/// Policy heads (action, baseline, reward prediction) over one trunk
/// kind: probe loss `Σ wπ·π + w_v·V + Σ w_r·RP`, with analytic head
/// gradients expressed in logit space.
pub fn verify_policy_heads(kind: TrunkKind) -> VerifyCase {
    let mut rng = ChaCha8Rng::seed_from_u64(17 + kind as u64);
    let cfg = tiny_cfg(kind);
    let mut policy: PolicyParams<f64> = PolicyParams::new(&cfg);
    fill_tensors(policy.tensors_mut(), &mut rng);
    let mut image = Tensor::zeros(&[cfg.in_h, cfg.in_w, cfg.in_c]);
    fill_tensor(&mut image, &mut rng);
    let instr = red_circle_north_from_blue_rect();
    let w_pi = probe(cfg.actions, &mut rng);
    let w_v = rng.gen::<f64>() - 0.5;
    let w_rp = probe(2, &mut rng);

    let eval = policy.forward_relation(&instr, &image);
    let dlogits = softmax_backward(&eval.probs, &w_pi);
    let drp_v = softmax_backward(&eval.rp_probs, &w_rp);
    let drp = [drp_v[0], drp_v[1]];
    let mut grads = policy.zeros_like();
    let dimage = policy.backward(&eval, &dlogits, w_v, Some(&drp), &mut grads);
    let mut analytic = get_flat(grads.tensors_mut());
    analytic.extend(dimage.data());

    let base: Vec<f64> = get_flat(policy.tensors_mut())
        .into_iter()
        .chain(image.data().iter().copied())
        .collect();
    let n_params = base.len() - image.len();
    let numeric = fd_gradient(
        |flat: &[f64]| {
            let mut p2 = policy.clone();
            set_flat(p2.tensors_mut(), &flat[..n_params]);
            let img = Tensor::from_vec(image.shape(), flat[n_params..].to_vec());
            let e = p2.forward_relation(&instr, &img);
            dot(&e.probs, &w_pi) + w_v * e.value + dot(&e.rp_probs, &w_rp)
        },
        &base,
    );
    VerifyCase {
        name: format!("policy-heads-{}", kind.name()),
        report: compare_grads(&analytic, &numeric),
    }
}

/// Reward-model head over one trunk kind: probe loss `w·D(c, s)` with the
/// analytic gradient expressed at the pre-sigmoid logit.
pub fn verify_disc_head(kind: TrunkKind) -> VerifyCase {
    let mut rng = ChaCha8Rng::seed_from_u64(19 + kind as u64);
    let cfg = tiny_cfg(kind);
    let mut disc: DiscParams<f64> = DiscParams::new(&cfg);
    fill_tensors(disc.tensors_mut(), &mut rng);
    let mut image = Tensor::zeros(&[cfg.in_h, cfg.in_w, cfg.in_c]);
    fill_tensor(&mut image, &mut rng);
    let instr = go_to_triangle();
    let w = rng.gen::<f64>() + 0.5;

    let eval = disc.forward_relation(&instr, &image);
    let dlogit = sigmoid_backward(eval.p, w);
    let mut grads = disc.zeros_like();
    let dimage = disc.backward(&eval, dlogit, &mut grads);
    let mut analytic = get_flat(grads.tensors_mut());
    analytic.extend(dimage.data());

    let base: Vec<f64> = get_flat(disc.tensors_mut())
        .into_iter()
        .chain(image.data().iter().copied())
        .collect();
    let n_params = base.len() - image.len();
    let numeric = fd_gradient(
        |flat: &[f64]| {
            let mut d2 = disc.clone();
            set_flat(d2.tensors_mut(), &flat[..n_params]);
            let img = Tensor::from_vec(image.shape(), flat[n_params..].to_vec());
            w * d2.forward_relation(&instr, &img).p
        },
        &base,
    );
    VerifyCase {
        name: format!("disc-head-{}", kind.name()),
        report: compare_grads(&analytic, &numeric),
    }
}

/// Runs the complete architectural gradient suite.
pub fn verify_gradients() -> Vec<VerifyCase> {
    vec![
        verify_stem(),
        verify_module_binary(),
        verify_module_unary(),
        verify_nmn_composition(),
        verify_nmn_goto(),
        verify_film_lstm(),
        verify_policy_heads(TrunkKind::Nmn),
        verify_policy_heads(TrunkKind::FilmLstm),
        verify_disc_head(TrunkKind::Nmn),
        verify_disc_head(TrunkKind::FilmLstm),
    ]
}
