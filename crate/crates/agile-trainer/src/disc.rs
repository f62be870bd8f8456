//! Discriminator training: batch assembly, false-negative filtering, and
//! the cross-entropy update.

use gridlu_env::WorldState;
use instance_gen::ExpertDataset;
use instruction_lang::Instruction;
use neural_substrate::{clip_column_norms, DiscParams, Scalar};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reward_semantics::{success, TemplateSet};

use crate::buffer::{Pair, ReplayBuffer};
use crate::config::TrainerConfig;
use crate::optim::RmsProp;
use crate::rollout::state_image;

/// Number of items retained by false-negative filtering: `rho * n` rounded
/// half up.
pub fn retained_count(n: usize, rho: f64) -> usize {
    (rho * n as f64 + 0.5).floor() as usize
}

/// Number of negatives to draw so that filtering retains half the batch:
/// `batch / (2 * rho)`, rounded to the nearest integer.
pub fn negative_draw_count(batch: usize, rho: f64) -> usize {
    (batch as f64 / (2.0 * rho)).round() as usize
}

/// Keeps the `retained_count(n, rho)` lowest-scored items. Sorting is
/// stable on the score alone, so equal scores keep their input order and
/// the earliest-inserted (oldest) ties are the ones retained. Every
/// retained score is at most every discarded score.
pub fn filter_negatives<T>(scored: Vec<(T, f64)>, rho: f64) -> Vec<(T, f64)> {
    assert!(rho > 0.0 && rho <= 1.0, "rho must satisfy 0 < rho <= 1");
    let keep = retained_count(scored.len(), rho);
    let mut scored = scored;
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    scored.truncate(keep);
    scored
}

/// Numerically stable binary cross entropy from the logit:
/// `max(z, 0) - z * y + ln(1 + exp(-|z|))`.
pub fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Diagnostics from one discriminator update.
#[derive(Debug, Clone, Copy)]
pub struct DiscDiagnostics {
    /// Mean cross entropy over the batch.
    pub loss: f64,
    /// Pre-clip global gradient norm.
    pub grad_norm: f64,
    /// Mean score of the positive half.
    pub mean_positive_score: f64,
    /// Mean score of the retained negative half.
    pub mean_negative_score: f64,
    /// Negatives drawn from the buffer before filtering.
    pub drawn_negatives: usize,
}

/// One discriminator update. Positives are `batch / 2` uniform draws from
/// the expert dataset; negatives are `batch / (2 rho)` buffer draws scored
/// by the current discriminator and filtered down to the lowest-scoring
/// `batch / 2` (false-negative filtering). After the cross-entropy step the
/// weight-matrix columns are clipped back to unit norm.
pub fn discriminator_step(
    disc: &mut DiscParams<f32>,
    dataset: &ExpertDataset,
    buffer: &mut ReplayBuffer,
    cfg: &TrainerConfig,
    optim: &mut RmsProp<f32>,
    rng: &mut ChaCha8Rng,
) -> DiscDiagnostics {
    assert!(!dataset.examples.is_empty(), "expert dataset is empty");
    let half = cfg.disc_batch / 2;

    let positives: Vec<Pair> = (0..half)
        .map(|_| {
            let ex = &dataset.examples[rng.gen_range(0..dataset.examples.len())];
            (ex.instruction.clone(), ex.goal)
        })
        .collect();

    let drawn = negative_draw_count(cfg.disc_batch, cfg.rho);
    let candidates = buffer.sample(drawn, rng);
    let scored: Vec<(Pair, f64)> = candidates
        .into_iter()
        .map(|(instr, state)| {
            let p = disc
                .forward(&instr, &state_image::<f32>(&state))
                .expect("discriminator trunk supports the task's instructions")
                .p
                .to_f64();
            ((instr, state), p)
        })
        .collect();
    let negatives = filter_negatives(scored, cfg.rho);
    assert_eq!(
        negatives.len(),
        half,
        "filtering must retain exactly half the batch; \
         disc_batch {} with rho {} drew {}",
        cfg.disc_batch,
        cfg.rho,
        drawn
    );

    let mut grads = disc.zeros_like();
    let mut loss = 0.0;
    let mut pos_score = 0.0;
    let mut neg_score = 0.0;
    let batch_n = cfg.disc_batch as f64;
    let mut labelled: Vec<(&Instruction, &WorldState, f64)> = Vec::with_capacity(cfg.disc_batch);
    labelled.extend(positives.iter().map(|(i, s)| (i, s, 1.0)));
    labelled.extend(negatives.iter().map(|((i, s), _)| (i, s, 0.0)));
    for (instr, state, y) in labelled {
        let eval = disc
            .forward(instr, &state_image::<f32>(state))
            .expect("discriminator trunk supports the task's instructions");
        let z = eval.logit.to_f64();
        let p = eval.p.to_f64();
        loss += bce_from_logit(z, y) / batch_n;
        let dlogit = f32::from_f64((p - y) / batch_n);
        disc.backward(&eval, dlogit, &mut grads);
        if y == 1.0 {
            pos_score += p / half as f64;
        } else {
            neg_score += p / half as f64;
        }
    }

    let grad_norm = optim.step(disc.tensors_mut(), grads.tensors_mut());
    clip_column_norms(disc.tensors_mut());

    DiscDiagnostics {
        loss,
        grad_norm,
        mean_positive_score: pos_score,
        mean_negative_score: neg_score,
        drawn_negatives: drawn,
    }
}

/// Confusion counts of discriminator verdicts against the ground-truth
/// checker over a set of probe pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total().max(1) as f64
    }

    /// False-positive rate among ground-truth negatives (0 when undefined).
    pub fn fp_rate(&self) -> f64 {
        let negatives = self.fp + self.tn;
        if negatives == 0 {
            0.0
        } else {
            self.fp as f64 / negatives as f64
        }
    }

    /// False-negative rate among ground-truth positives (0 when undefined).
    pub fn fn_rate(&self) -> f64 {
        let positives = self.tp + self.fn_;
        if positives == 0 {
            0.0
        } else {
            self.fn_ as f64 / positives as f64
        }
    }
}

/// Scores each `(instruction, state)` pair with the discriminator (verdict:
/// probability strictly above one half) and tallies it against the
/// ground-truth checker.
pub fn confusion_counts(
    disc: &DiscParams<f32>,
    pairs: &[Pair],
    templates: &TemplateSet,
) -> Confusion {
    let mut c = Confusion::default();
    for (instr, state) in pairs {
        let p = disc
            .forward(instr, &state_image::<f32>(state))
            .expect("discriminator trunk supports the task's instructions")
            .p
            .to_f64();
        let predicted = p > 0.5;
        let actual = success(instr, state, templates);
        match (predicted, actual) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}
