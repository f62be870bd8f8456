//! Discriminator confusion tracking: thresholded scores compared against
//! the ground-truth checker on states drawn from live rollouts.

use agile_trainer::{confusion_counts, Pair, RewardSource, TrainerConfig};
use agile_trainer::{collect_rollout, EpisodeCursor};
use gridlu_env::EnvModifier;
use instance_gen::{GenOptions, InstanceStream};
use neural_substrate::{DiscParams, PolicyParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_semantics::TemplateSet;

/// One probe batch: counts of `[D(c,s) > 0.5]` against the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionRecord {
    /// Caller-supplied position on the training axis.
    pub step: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionRecord {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// False positives over ground-truth negatives; 0 when none were seen.
    pub fn fp_rate(&self) -> f64 {
        let negatives = self.fp + self.tn;
        if negatives == 0 {
            0.0
        } else {
            self.fp as f64 / negatives as f64
        }
    }

    /// False negatives over ground-truth positives; 0 when none were seen.
    pub fn fn_rate(&self) -> f64 {
        let positives = self.tp + self.fn_;
        if positives == 0 {
            0.0
        } else {
            self.fn_ as f64 / positives as f64
        }
    }
}

/// Scores each probe batch with the discriminator and tallies it against
/// the ground-truth checker. One record per batch; counts within a record
/// sum to that batch's size.
pub fn track_confusion(
    disc: &DiscParams<f32>,
    probes: impl IntoIterator<Item = (usize, Vec<Pair>)>,
    templates: &TemplateSet,
) -> Vec<ConfusionRecord> {
    probes
        .into_iter()
        .map(|(step, pairs)| {
            let c = confusion_counts(disc, &pairs, templates);
            let record = ConfusionRecord {
                step,
                tp: c.tp,
                fp: c.fp,
                tn: c.tn,
                fn_: c.fn_,
            };
            debug_assert_eq!(record.total(), pairs.len());
            record
        })
        .collect()
}

/// Draws `n` (instruction, state) probe pairs from live policy rollouts on
/// fresh instances: the same distribution the replay buffer sees during
/// training. Deterministic given `seed`.
pub fn collect_probe_pairs(
    policy: &PolicyParams<f32>,
    cfg: &TrainerConfig,
    gen_opts: &GenOptions,
    templates: &TemplateSet,
    n: usize,
    seed: u64,
) -> Vec<Pair> {
    assert!(n > 0, "probe draws need n > 0");
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let instance_seed: u64 = master.gen();
    let action_seed: u64 = master.gen();
    let mut stream = InstanceStream::new(cfg.task, instance_seed, gen_opts.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let mut cursor = EpisodeCursor::new(&stream.next_instance());
        while !cursor.done(cfg) && pairs.len() < n {
            let rollout = collect_rollout(
                policy,
                None,
                &mut cursor,
                &EnvModifier::NONE,
                RewardSource::GroundTruth,
                cfg,
                templates,
                &mut rng,
                None,
            );
            // Each episode state once: the start only on the episode's
            // opening rollout, the cut state only as the next rollout's
            // start.
            let skip = if rollout.from_start { 0 } else { 1 };
            for state in &rollout.states[skip..] {
                pairs.push((rollout.instruction.clone(), *state));
            }
        }
    }
    pairs.truncate(n);
    pairs
}
