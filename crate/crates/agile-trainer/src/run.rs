//! The interleaved training loop: policy workers, the discriminator worker,
//! metrics, checkpoints, and frozen-reward fine-tuning.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use gridlu_env::EnvModifier;
use instance_gen::{ExpertDataset, GenOptions, InstanceStream};
use neural_substrate::{
    load_params, save_params, CheckpointError, DiscParams, ParamKind, PolicyParams, Scalar, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_semantics::{success, TemplateSet};
use thiserror::Error;

use crate::buffer::{Pair, ReplayBuffer, RpBuffer};
use crate::config::{ConfigError, TrainerConfig};
use crate::disc::{confusion_counts, discriminator_step, Confusion};
use crate::optim::RmsProp;
use crate::policy::{policy_update, reward_prediction_update};
use crate::rollout::{collect_rollout, EpisodeCursor, RewardSource};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("reward-model training requires an expert dataset")]
    MissingDataset,
    #[error("expert dataset is for task {dataset}, config wants {config}")]
    DatasetTask { dataset: String, config: String },
    #[error("ground-truth rewards take no discriminator")]
    UnexpectedDisc,
    #[error("modelled rewards require a discriminator")]
    MissingDisc,
}

/// Where and how often `run_agile` writes checkpoints.
#[derive(Debug, Clone)]
pub struct CheckpointPlan {
    pub dir: PathBuf,
    /// Periodic checkpoint every this many metrics points (0: final only).
    pub every_points: usize,
}

/// Everything a training run needs besides the models themselves.
#[derive(Debug, Clone)]
pub struct RunSetup<'a> {
    pub cfg: &'a TrainerConfig,
    pub source: RewardSource,
    /// Expert goal states; required when the discriminator is being trained.
    pub dataset: Option<&'a ExpertDataset>,
    pub modifier: EnvModifier,
    pub gen_opts: GenOptions,
    pub templates: &'a TemplateSet,
    pub seed: u64,
    /// Hard cap on environment transitions (all workers combined).
    pub max_env_steps: usize,
    /// Cycles between metrics points; one cycle is every policy worker
    /// taking a turn, then the discriminator worker if one is active.
    pub metrics_every: usize,
    pub checkpoint: Option<CheckpointPlan>,
}

/// One emitted metrics record. `line` is the exact serialized form; the
/// numeric fields are window aggregates since the previous point.
#[derive(Debug, Clone)]
pub struct MetricsPoint {
    pub cycle: usize,
    pub env_steps: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub disc_loss: f64,
    pub disc_fp: f64,
    pub disc_fn: f64,
    pub entropy: f64,
    /// Mean per-step emitted reward over the window (not in `line`; used
    /// for checkpoint selection).
    pub mean_reward: f64,
    pub line: String,
}

/// Result of a completed (or early-stopped) run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Line-delimited metrics stream.
    pub metrics: String,
    pub env_steps: usize,
    pub episodes: usize,
    pub successes: usize,
    /// Every distinct reward value emitted during the run, ascending.
    pub distinct_rewards: Vec<f64>,
    pub stopped_early: bool,
    /// Buffer draws that fell back to sampling with replacement.
    pub replacement_draws: usize,
    pub last_point: Option<MetricsPoint>,
    /// Largest window mean reward seen at any metrics point.
    pub best_mean_reward: f64,
}

struct WorkerSlot {
    stream: InstanceStream,
    rng: ChaCha8Rng,
    cursor: Option<EpisodeCursor>,
}

impl WorkerSlot {
    /// Replaces a missing or finished episode with a fresh instance.
    fn ensure_episode(&mut self, cfg: &TrainerConfig) {
        if self.cursor.as_ref().map_or(true, |c| c.done(cfg)) {
            let instance = self.stream.next_instance();
            self.cursor = Some(EpisodeCursor::new(&instance));
        }
    }
}

#[derive(Default)]
struct Window {
    episodes: usize,
    successes: usize,
    policy_loss_sum: f64,
    policy_updates: usize,
    entropy_sum: f64,
    entropy_steps: usize,
    reward_sum: f64,
    reward_steps: usize,
    disc_loss_sum: f64,
    disc_updates: usize,
    confusion: Confusion,
}

impl Window {
    fn point(&self, cycle: usize, env_steps: usize, episodes_total: usize) -> MetricsPoint {
        let ratio = |num: f64, den: usize| if den == 0 { f64::NAN } else { num / den as f64 };
        let success_rate = ratio(self.successes as f64, self.episodes);
        let policy_loss = ratio(self.policy_loss_sum, self.policy_updates);
        let entropy = ratio(self.entropy_sum, self.entropy_steps);
        let disc_loss = ratio(self.disc_loss_sum, self.disc_updates);
        let (disc_fp, disc_fn) = if self.disc_updates == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (self.confusion.fp_rate(), self.confusion.fn_rate())
        };
        let mean_reward = ratio(self.reward_sum, self.reward_steps);
        let line = format!(
            "step={} success_rate={:.6} policy_loss={:.6} disc_loss={:.6} \
             disc_fp={:.6} disc_fn={:.6} entropy={:.6}",
            env_steps, success_rate, policy_loss, disc_loss, disc_fp, disc_fn, entropy
        );
        MetricsPoint {
            cycle,
            env_steps,
            episodes: episodes_total,
            success_rate,
            policy_loss,
            disc_loss,
            disc_fp,
            disc_fn,
            entropy,
            mean_reward,
            line,
        }
    }
}

/// Runs interleaved AGILE (or ground-truth) training until the environment
/// step budget is exhausted or `should_stop` returns true at a metrics
/// point. Single threaded and deterministic: the same models, config, and
/// seed reproduce the metrics stream and final parameters bit for bit.
///
/// Scheduling: each cycle gives every policy worker one rollout and update,
/// then the single discriminator worker (active only when training against
/// a non-frozen reward model) one rollout, a buffer append of every visited
/// state, and one discriminator update. Ground-truth runs instead take the
/// auxiliary reward-prediction gradient after each policy update. A worker
/// panic aborts the run after writing a diagnostic checkpoint.
pub fn run_agile(
    policy: &mut PolicyParams<f32>,
    mut disc: Option<&mut DiscParams<f32>>,
    setup: &RunSetup,
    mut should_stop: impl FnMut(&MetricsPoint, &PolicyParams<f32>) -> bool,
) -> Result<RunSummary, RunError> {
    let cfg = setup.cfg;
    cfg.validate()?;
    let disc_trains = setup.source == RewardSource::RewardModel { frozen: false };
    match setup.source {
        RewardSource::GroundTruth => {
            if disc.is_some() {
                return Err(RunError::UnexpectedDisc);
            }
        }
        RewardSource::RewardModel { .. } => {
            if disc.is_none() {
                return Err(RunError::MissingDisc);
            }
        }
    }
    let dataset = if disc_trains {
        let d = setup.dataset.ok_or(RunError::MissingDataset)?;
        if d.task != cfg.task {
            return Err(RunError::DatasetTask {
                dataset: d.task.name().to_string(),
                config: cfg.task.name().to_string(),
            });
        }
        Some(d)
    } else {
        None
    };

    // Fixed-order seed derivation keeps runs reproducible per config.
    let mut seeder = ChaCha8Rng::seed_from_u64(setup.seed);
    let slot = |seeder: &mut ChaCha8Rng| WorkerSlot {
        stream: InstanceStream::new(cfg.task, seeder.gen(), setup.gen_opts.clone()),
        rng: ChaCha8Rng::seed_from_u64(seeder.gen()),
        cursor: None,
    };
    let mut workers: Vec<WorkerSlot> = (0..cfg.policy_workers).map(|_| slot(&mut seeder)).collect();
    let mut disc_worker = disc_trains.then(|| slot(&mut seeder));
    let mut batch_rng = ChaCha8Rng::seed_from_u64(seeder.gen());
    let mut rp_rng = ChaCha8Rng::seed_from_u64(seeder.gen());

    let mut policy_optim = RmsProp::<f32>::new(cfg.policy_optim);
    let mut disc_optim = RmsProp::<f32>::new(cfg.disc_optim);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut rp = RpBuffer::new();

    let mut metrics = String::new();
    let mut env_steps = 0usize;
    let mut episodes = 0usize;
    let mut successes = 0usize;
    let mut reward_bits: BTreeSet<u64> = BTreeSet::new();
    let mut stopped_early = false;
    let mut last_point: Option<MetricsPoint> = None;
    let mut best_mean_reward = f64::NEG_INFINITY;
    let metrics_every = setup.metrics_every.max(1);

    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let mut window = Window::default();
        let mut cycle = 0usize;
        let mut points = 0usize;
        'run: loop {
            for k in 0..cfg.policy_workers {
                if env_steps >= setup.max_env_steps {
                    break 'run;
                }
                let w = &mut workers[k];
                w.ensure_episode(cfg);
                let cursor = w.cursor.as_mut().unwrap();
                let feed = cfg.all_workers_feed_buffer.then_some(&mut buffer);
                let rollout = collect_rollout(
                    policy,
                    disc.as_deref(),
                    cursor,
                    &setup.modifier,
                    setup.source,
                    cfg,
                    setup.templates,
                    &mut w.rng,
                    feed,
                );
                env_steps += rollout.len();
                for &r in &rollout.rewards {
                    reward_bits.insert(r.to_bits());
                    window.reward_sum += r;
                }
                window.reward_steps += rollout.len();
                if rollout.terminal {
                    episodes += 1;
                    window.episodes += 1;
                    if success(&rollout.instruction, rollout.final_state(), setup.templates) {
                        successes += 1;
                        window.successes += 1;
                    }
                }
                let objective = policy_update(policy, &rollout, cfg, &mut policy_optim);
                window.policy_loss_sum += objective.total;
                window.policy_updates += 1;
                window.entropy_sum += objective.entropy_sum;
                window.entropy_steps += objective.steps;
                if setup.source == RewardSource::GroundTruth {
                    for (t, &r) in rollout.rewards.iter().enumerate() {
                        rp.push(rollout.instruction.clone(), rollout.states[t], r > 0.0);
                    }
                    reward_prediction_update(policy, &rp, cfg, &mut policy_optim, &mut rp_rng);
                }
            }

            if let Some(w) = disc_worker.as_mut() {
                if env_steps >= setup.max_env_steps {
                    break 'run;
                }
                w.ensure_episode(cfg);
                let cursor = w.cursor.as_mut().unwrap();
                let rollout = collect_rollout(
                    policy,
                    disc.as_deref(),
                    cursor,
                    &setup.modifier,
                    setup.source,
                    cfg,
                    setup.templates,
                    &mut w.rng,
                    Some(&mut buffer),
                );
                env_steps += rollout.len();
                for &r in &rollout.rewards {
                    reward_bits.insert(r.to_bits());
                    window.reward_sum += r;
                }
                window.reward_steps += rollout.len();
                if rollout.terminal {
                    episodes += 1;
                    window.episodes += 1;
                    if success(&rollout.instruction, rollout.final_state(), setup.templates) {
                        successes += 1;
                        window.successes += 1;
                    }
                }
                let d = disc.as_deref_mut().unwrap();
                let diag = discriminator_step(
                    d,
                    dataset.unwrap(),
                    &mut buffer,
                    cfg,
                    &mut disc_optim,
                    &mut batch_rng,
                );
                window.disc_loss_sum += diag.loss;
                window.disc_updates += 1;
                let probes: Vec<Pair> = rollout
                    .states
                    .iter()
                    .map(|s| (rollout.instruction.clone(), *s))
                    .collect();
                let c = confusion_counts(d, &probes, setup.templates);
                window.confusion.tp += c.tp;
                window.confusion.fp += c.fp;
                window.confusion.tn += c.tn;
                window.confusion.fn_ += c.fn_;
            }

            cycle += 1;
            let budget_done = env_steps >= setup.max_env_steps;
            if cycle % metrics_every == 0 || budget_done {
                let point = window.point(cycle, env_steps, episodes);
                metrics.push_str(&point.line);
                metrics.push('\n');
                points += 1;
                if point.mean_reward.is_finite() {
                    best_mean_reward = best_mean_reward.max(point.mean_reward);
                }
                if let Some(plan) = &setup.checkpoint {
                    if plan.every_points > 0 && points % plan.every_points == 0 {
                        write_point_checkpoint(plan, cfg, setup.seed, &point, policy, disc.as_deref_mut());
                    }
                }
                let stop = should_stop(&point, policy);
                last_point = Some(point);
                window = Window::default();
                if stop {
                    stopped_early = true;
                    break 'run;
                }
            }
            if budget_done {
                break 'run;
            }
        }
    }));

    if let Err(payload) = outcome {
        let dir = setup
            .checkpoint
            .as_ref()
            .map(|p| p.dir.clone())
            .unwrap_or_else(std::env::temp_dir);
        let _ = std::fs::create_dir_all(&dir);
        let path = dir.join("panic.gluc");
        let meta = format!(
            "format = agile-checkpoint v1\npanic_env_steps = {}\nseed = {}\ndisc = {}\n{}",
            env_steps,
            setup.seed,
            if disc.is_some() { 1 } else { 0 },
            cfg.to_config_string()
        );
        match save_checkpoint(&path, &meta, policy, disc.as_deref_mut()) {
            Ok(()) => eprintln!(
                "run aborted by worker panic; diagnostic checkpoint at {}",
                path.display()
            ),
            Err(e) => eprintln!("run aborted by worker panic; checkpoint failed: {e}"),
        }
        resume_unwind(payload);
    }

    if let Some(plan) = &setup.checkpoint {
        let final_point = last_point.clone().unwrap_or_else(|| Window::default().point(0, env_steps, episodes));
        write_named_checkpoint(&plan.dir.join("final.gluc"), cfg, setup.seed, &final_point, policy, disc.as_deref_mut());
    }

    Ok(RunSummary {
        metrics,
        env_steps,
        episodes,
        successes,
        distinct_rewards: reward_bits.iter().map(|b| f64::from_bits(*b)).collect(),
        stopped_early,
        replacement_draws: buffer.replacement_draws,
        last_point,
        best_mean_reward,
    })
}

fn checkpoint_meta(cfg: &TrainerConfig, seed: u64, point: &MetricsPoint, has_disc: bool) -> String {
    let mut meta = String::new();
    let _ = writeln!(meta, "format = agile-checkpoint v1");
    let _ = writeln!(meta, "seed = {seed}");
    let _ = writeln!(meta, "env_steps = {}", point.env_steps);
    let _ = writeln!(meta, "episodes = {}", point.episodes);
    let _ = writeln!(meta, "success_rate = {:.6}", point.success_rate);
    let _ = writeln!(meta, "mean_reward = {:.6}", point.mean_reward);
    let _ = writeln!(meta, "disc = {}", if has_disc { 1 } else { 0 });
    meta.push_str(&cfg.to_config_string());
    meta
}

fn write_point_checkpoint(
    plan: &CheckpointPlan,
    cfg: &TrainerConfig,
    seed: u64,
    point: &MetricsPoint,
    policy: &mut PolicyParams<f32>,
    disc: Option<&mut DiscParams<f32>>,
) {
    let path = plan.dir.join(format!("ckpt-{:010}.gluc", point.env_steps));
    write_named_checkpoint(&path, cfg, seed, point, policy, disc);
}

fn write_named_checkpoint(
    path: &Path,
    cfg: &TrainerConfig,
    seed: u64,
    point: &MetricsPoint,
    policy: &mut PolicyParams<f32>,
    disc: Option<&mut DiscParams<f32>>,
) {
    if let Some(parent) = path.parent() {
        let _ = std::fs::create_dir_all(parent);
    }
    let meta = checkpoint_meta(cfg, seed, point, disc.is_some());
    save_checkpoint(path, &meta, policy, disc)
        .unwrap_or_else(|e| panic!("checkpoint write to {} failed: {e}", path.display()));
}

fn prefixed<'a, F: Scalar>(
    policy: &'a mut PolicyParams<F>,
    disc: Option<&'a mut DiscParams<F>>,
) -> Vec<(String, &'a mut Tensor<F>, ParamKind)> {
    let mut v: Vec<(String, &mut Tensor<F>, ParamKind)> = policy
        .tensors_mut()
        .into_iter()
        .map(|(n, t, k)| (format!("policy.{n}"), t, k))
        .collect();
    if let Some(d) = disc {
        v.extend(
            d.tensors_mut()
                .into_iter()
                .map(|(n, t, k)| (format!("disc.{n}"), t, k)),
        );
    }
    v
}

/// Saves policy (and optionally discriminator) parameters under the
/// `policy.` / `disc.` name prefixes.
pub fn save_checkpoint<F: Scalar>(
    path: &Path,
    meta: &str,
    policy: &mut PolicyParams<F>,
    disc: Option<&mut DiscParams<F>>,
) -> Result<(), CheckpointError> {
    save_params(path, meta, prefixed(policy, disc))
}

/// Loads a checkpoint saved by `save_checkpoint` into the given models,
/// returning its metadata. Shapes and names must match exactly.
pub fn load_checkpoint<F: Scalar>(
    path: &Path,
    policy: &mut PolicyParams<F>,
    disc: Option<&mut DiscParams<F>>,
) -> Result<String, CheckpointError> {
    load_params(path, prefixed(policy, disc))
}

/// Bitwise equality of two discriminators' parameters.
pub fn disc_params_identical(a: &DiscParams<f32>, b: &DiscParams<f32>) -> bool {
    let (mut a, mut b) = (a.clone(), b.clone());
    let (ta, tb) = (a.tensors_mut(), b.tensors_mut());
    ta.len() == tb.len()
        && ta.into_iter().zip(tb).all(|((na, va, _), (nb, vb, _))| {
            na == nb
                && va.shape() == vb.shape()
                && va
                    .data()
                    .iter()
                    .zip(vb.data())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
        })
}

/// Fine-tunes the policy against a frozen reward model: rewards come from
/// the discriminator's thresholded scores, the discriminator itself is
/// never updated, and that freeze is verified (the discriminator must be
/// bit-identical before and after, or this panics).
pub fn fine_tune(
    policy: &mut PolicyParams<f32>,
    disc: &DiscParams<f32>,
    setup: &RunSetup,
    should_stop: impl FnMut(&MetricsPoint, &PolicyParams<f32>) -> bool,
) -> Result<RunSummary, RunError> {
    assert_eq!(
        setup.source,
        RewardSource::RewardModel { frozen: true },
        "fine_tune requires the frozen reward-model source"
    );
    let mut working = disc.clone();
    let summary = run_agile(policy, Some(&mut working), setup, should_stop)?;
    assert!(
        disc_params_identical(&working, disc),
        "reward model changed during fine-tuning"
    );
    Ok(summary)
}
