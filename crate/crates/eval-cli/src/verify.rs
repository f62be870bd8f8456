//! Self-check suite: every published count, the gradient checks, the
//! filtering arithmetic, and smoke-scale exercises of the training
//! machinery, each reported as one pass/fail line. Fast enough to run
//! before every experiment.

use agile_trainer::{
    discriminator_step, filter_negatives, negative_draw_count, retained_count, run_agile,
    OptimConfig, ReplayBuffer, RewardSource, RmsProp, RunSetup, TrainerConfig,
};
use gridlu_env::{Block, ColorId, EnvModifier, GridPos, Shape, WorldState};
use instance_gen::{build_dataset, GenOptions, InstanceStream, InstructionFilter, Task};
use instruction_lang::{
    enumerate_descriptors, enumerate_relations, ArrangementWord, ArrInstruction, Instruction,
    RelInstruction, Relation,
};
use neural_substrate::{
    init_disc, init_policy, verify_gradients, DiscParams, ParamKind, PolicyParams, Scalar, Tensor,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use reward_semantics::{
    binomial, count_goal_states, holds, oracle, sample_arrangement_goal, success, TemplateSet,
};
use std::fmt::Write as _;

/// One verification outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        CheckResult { name, pass, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} - {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// The published goal-state table: word, arrangement positions, total goal
/// states. The totals follow from the positions column and the shared
/// factor 3 colors x 25 agent cells x C(21,4) distractor placements x 2
/// distractor colors.
pub const GOAL_STATE_TABLE: [(ArrangementWord, u64, u64); 9] = [
    (ArrangementWord::Square, 16, 14_364_000),
    (ArrangementWord::Line, 40, 35_910_000),
    (ArrangementWord::Dline, 8, 7_182_000),
    (ArrangementWord::Triangle, 48, 43_092_000),
    (ArrangementWord::Circle, 9, 8_079_750),
    (ArrangementWord::Eel, 48, 43_092_000),
    (ArrangementWord::Snake, 48, 43_092_000),
    (ArrangementWord::Connected, 200, 179_550_000),
    (ArrangementWord::Disconnected, 17, 15_261_750),
];

/// Sum of the `GOAL_STATE_TABLE` totals.
pub const GOAL_STATE_TOTAL: u64 = 389_623_500;

pub fn check_grammar_counts() -> CheckResult {
    let all = enumerate_relations();
    let goto = all
        .iter()
        .filter(|i| matches!(i, Instruction::Relation(r) if r.mentions_agent()))
        .count();
    let bring = all.len() - goto;
    let descriptors = enumerate_descriptors().len();
    let pass = all.len() == 990 && goto == 150 && bring == 840 && descriptors == 15;
    CheckResult::new(
        "grammar-counts",
        pass,
        format!(
            "{} instructions ({} go-to, {} bring-to), {} descriptors; expected 990/150/840, 15",
            all.len(),
            goto,
            bring,
            descriptors
        ),
    )
}

pub fn check_arrangement_combinatorics() -> CheckResult {
    let mut pass = true;
    let mut detail = String::new();
    let mut sum = 0u64;
    for &(word, positions, expected) in &GOAL_STATE_TABLE {
        let got = count_goal_states(word, positions);
        sum += got;
        if got != expected {
            pass = false;
            let _ = write!(detail, "{}: {} != {}; ", word.name(), got, expected);
        }
    }
    if sum != GOAL_STATE_TOTAL {
        pass = false;
        let _ = write!(detail, "sum {} != {}; ", sum, GOAL_STATE_TOTAL);
    }
    if binomial(21, 4) != 5985 {
        pass = false;
        let _ = write!(detail, "C(21,4) = {} != 5985; ", binomial(21, 4));
    }
    if pass {
        detail = format!("all 9 rows exact, sum {} = {}, C(21,4) = 5985", sum, GOAL_STATE_TOTAL);
    }
    CheckResult::new("arrangement-combinatorics", pass, detail)
}

pub fn check_generator_statistics() -> CheckResult {
    let n = 100_000;
    let mut stream = InstanceStream::new(Task::Relations, 20_260_816, GenOptions::default());
    let mut goto = 0usize;
    for _ in 0..n {
        if let Instruction::Relation(r) = stream.next_instance().instruction {
            if r.mentions_agent() {
                goto += 1;
            }
        }
    }
    let fraction = goto as f64 / n as f64;
    CheckResult::new(
        "generator-statistics",
        (fraction - 0.25).abs() <= 0.01,
        format!("go-to fraction {fraction:.4} over {n} instances (want 0.25 +/- 0.01)"),
    )
}

fn random_state(rng: &mut ChaCha8Rng) -> WorldState {
    let n_blocks = rng.gen_range(0..=8);
    let mut cells: Vec<usize> = (0..25).collect();
    cells.shuffle(rng);
    let blocks: Vec<(GridPos, Block)> = cells[..n_blocks]
        .iter()
        .map(|&i| {
            (
                GridPos::from_index(i),
                Block::new(
                    *ColorId::ALL.choose(rng).unwrap(),
                    *Shape::ALL.choose(rng).unwrap(),
                ),
            )
        })
        .collect();
    let agent = GridPos::from_index(rng.gen_range(0..25));
    WorldState::new(&blocks, agent, None).unwrap()
}

pub fn check_semantics_oracle(templates: &TemplateSet) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut disagreements = 0usize;
    let mut states = 0usize;
    for relation in Relation::ALL {
        let instrs: Vec<RelInstruction> = enumerate_relations()
            .into_iter()
            .filter_map(|i| match i {
                Instruction::Relation(r) if r.relation == relation => Some(r),
                _ => None,
            })
            .collect();
        for _ in 0..1000 {
            let s = random_state(&mut rng);
            let instr = instrs[rng.gen_range(0..instrs.len())];
            states += 1;
            if holds(&instr, &s) != oracle::holds_brute_force(&instr, &s) {
                disagreements += 1;
            }
        }
    }

    let relation_instrs: Vec<RelInstruction> = enumerate_relations()
        .into_iter()
        .filter_map(|i| match i {
            Instruction::Relation(r) => Some(r),
            _ => None,
        })
        .collect();
    let mut bad_goals = 0usize;
    for _ in 0..10_000 {
        let instr = relation_instrs[rng.gen_range(0..relation_instrs.len())];
        let goal = instance_gen::sample_relations_goal(&instr, &mut rng);
        if !success(&Instruction::Relation(instr), &goal, templates) {
            bad_goals += 1;
        }
    }
    let arr_instrs: Vec<ArrInstruction> = instruction_lang::enumerate_arrangements()
        .into_iter()
        .filter_map(|i| match i {
            Instruction::Arrangement(a) => Some(a),
            _ => None,
        })
        .collect();
    for _ in 0..10_000 {
        let instr = arr_instrs[rng.gen_range(0..arr_instrs.len())];
        let distractors = if rng.gen::<bool>() { 4 } else { 0 };
        let goal = sample_arrangement_goal(&instr, distractors, &mut rng, templates)
            .expect("builtin templates place every word");
        if !success(&Instruction::Arrangement(instr.clone()), &goal, templates) {
            bad_goals += 1;
        }
    }
    CheckResult::new(
        "semantics-oracle",
        disagreements == 0 && bad_goals == 0,
        format!(
            "{disagreements} oracle disagreements over {states} states; {bad_goals} sampled goals fail their checker over 20000"
        ),
    )
}

pub fn check_gradients() -> CheckResult {
    let mut cases = verify_gradients();
    cases.extend(agile_trainer::verify_policy_objective());
    let mut pass = true;
    let mut worst_rel: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let mut detail = String::new();
    for case in &cases {
        worst_rel = worst_rel.max(case.report.max_rel_err);
        worst_abs = worst_abs.max(case.report.max_abs_diff);
        if !case.report.pass || case.report.max_rel_err > 1e-4 {
            pass = false;
            let _ = write!(detail, "{} rel err {:.3e}; ", case.name, case.report.max_rel_err);
        }
    }
    if pass {
        detail = format!(
            "{} cases pass at rel err <= 1e-4 (worst rel {:.3e}, worst abs {:.3e})",
            cases.len(),
            worst_rel,
            worst_abs
        );
    }
    CheckResult::new("gradient-verification", pass, detail)
}

/// Round-half-up of `rho * n`, computed through a second route (integer
/// scaling at 1e6 precision) to cross-check `retained_count`.
fn round_half_up_independent(n: usize, rho: f64) -> usize {
    let scaled = (rho * 1e6).round() as u128 * n as u128;
    ((scaled + 500_000) / 1_000_000) as usize
}

pub fn check_filtering_arithmetic() -> CheckResult {
    let mut pass = true;
    let mut detail = String::new();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for &rho in &[0.1, 0.25, 0.5, 1.0] {
        for n in [0usize, 1, 7, 10, 64, 128, 512, 1000] {
            let want = round_half_up_independent(n, rho);
            if retained_count(n, rho) != want {
                pass = false;
                let _ = write!(detail, "retained_count({n}, {rho}) != {want}; ");
            }
            let scored: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.gen::<f64>())).collect();
            let kept = filter_negatives(scored.clone(), rho);
            if kept.len() != want {
                pass = false;
                let _ = write!(detail, "filter kept {} of {n} at rho={rho}; ", kept.len());
            }
            let max_kept = kept.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
            let kept_ids: std::collections::BTreeSet<usize> =
                kept.iter().map(|&(i, _)| i).collect();
            if scored
                .iter()
                .any(|&(i, s)| !kept_ids.contains(&i) && s < max_kept)
            {
                pass = false;
                let _ = write!(detail, "non-lowest retained at n={n} rho={rho}; ");
            }
        }
        // Batch composition: BS/2 positives by construction; the negative
        // draw filters back down to exactly BS/2.
        let bs = 256;
        if retained_count(negative_draw_count(bs, rho), rho) != bs / 2 {
            pass = false;
            let _ = write!(detail, "draw/filter chain misses BS/2 at rho={rho}; ");
        }
    }
    if pass {
        detail = "retained counts exact for rho in {0.1, 0.25, 0.5, 1.0}; batches half positive"
            .to_string();
    }
    CheckResult::new("filtering-arithmetic", pass, detail)
}

/// Largest column sum-of-squares over all weight matrices, the quantity
/// the per-column max-norm constraint bounds by 1.
pub fn max_weight_column_sumsq<F: Scalar>(
    tensors: Vec<(String, &mut Tensor<F>, ParamKind)>,
) -> f64 {
    let mut worst = 0.0f64;
    for (_, tensor, kind) in tensors {
        if kind != ParamKind::Weight {
            continue;
        }
        let out = *tensor.shape().last().expect("weights have a last axis");
        let mut sums = vec![0.0f64; out];
        for (i, v) in tensor.data().iter().enumerate() {
            let x = v.to_f64();
            sums[i % out] += x * x;
        }
        worst = worst.max(sums.iter().cloned().fold(0.0, f64::max));
    }
    worst
}

fn tiny_config() -> TrainerConfig {
    TrainerConfig {
        policy_workers: 2,
        rollout_len: 5,
        episode_len: 10,
        disc_batch: 8,
        rho: 0.25,
        buffer_capacity: 300,
        stem_c1: 2,
        lstm_c2: 2,
        trunk_c: 4,
        hidden: 8,
        ..TrainerConfig::for_task(Task::Relations)
    }
}

pub fn check_column_norm_clipping(templates: &TemplateSet) -> CheckResult {
    let cfg = TrainerConfig {
        rho: 0.5,
        // A deliberately hot learning rate so raw updates would break the
        // bound if clipping were missing.
        disc_optim: OptimConfig {
            lr: 0.05,
            ..TrainerConfig::for_task(Task::Relations).disc_optim
        },
        ..tiny_config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut disc: DiscParams<f32> = init_disc(&cfg.disc_model(), &mut rng);
    let dataset = build_dataset(
        Task::Relations,
        24,
        &mut rng,
        43,
        &GenOptions::default(),
        templates,
    );
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut stream = InstanceStream::new(Task::Relations, 44, GenOptions::default());
    for _ in 0..40 {
        let inst = stream.next_instance();
        buffer.push(inst.instruction, inst.initial);
    }
    let mut optim = RmsProp::new(cfg.disc_optim);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        discriminator_step(&mut disc, &dataset, &mut buffer, &cfg, &mut optim, &mut rng);
        worst = worst.max(max_weight_column_sumsq(disc.tensors_mut()));
    }
    CheckResult::new(
        "column-norm-clipping",
        worst <= 1.0 + 1e-6,
        format!("max weight column sum-of-squares {worst:.8} after each of 10 updates (bound 1 + 1e-6)"),
    )
}

/// Smoke-scale training exercises: a ground-truth run and an adversarial
/// run both complete and produce well-formed metrics. The desk-scale
/// success-rate gates run in the acceptance suite at full budget.
pub fn check_training_smoke(templates: &TemplateSet) -> Vec<CheckResult> {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let mut policy: PolicyParams<f32> = init_policy(&cfg.policy_model(), &mut rng);
    let gt_setup = RunSetup {
        cfg: &cfg,
        source: RewardSource::GroundTruth,
        dataset: None,
        modifier: EnvModifier::NONE,
        gen_opts: GenOptions::default(),
        templates,
        seed: 45,
        max_env_steps: 400,
        metrics_every: 2,
        checkpoint: None,
    };
    let gt = run_agile(&mut policy, None, &gt_setup, |_, _| false);

    let mut policy2: PolicyParams<f32> = init_policy(&cfg.policy_model(), &mut rng);
    let mut disc: DiscParams<f32> = init_disc(&cfg.disc_model(), &mut rng);
    let dataset = build_dataset(
        Task::Relations,
        16,
        &mut rng,
        46,
        &GenOptions::default(),
        templates,
    );
    let agile_setup = RunSetup {
        source: RewardSource::RewardModel { frozen: false },
        dataset: Some(&dataset),
        seed: 46,
        ..gt_setup
    };
    let agile = run_agile(&mut policy2, Some(&mut disc), &agile_setup, |_, _| false);

    let mut results = Vec::new();
    let mut rewards_ok = true;
    let mut reward_detail = String::new();
    match (&gt, &agile) {
        (Ok(g), Ok(a)) => {
            let disc_loss_finite = a.last_point.as_ref().is_some_and(|p| p.disc_loss.is_finite());
            results.push(CheckResult::new(
                "training-smoke",
                g.episodes > 0 && g.env_steps >= 400 && a.episodes > 0 && disc_loss_finite,
                format!(
                    "ground-truth: {} steps {} episodes; adversarial: {} steps {} episodes, disc loss finite = {}",
                    g.env_steps, g.episodes, a.env_steps, a.episodes, disc_loss_finite
                ),
            ));
            for summary in [g, a] {
                for &r in &summary.distinct_rewards {
                    if r != 0.0 && r != 0.1 {
                        rewards_ok = false;
                        let _ = write!(reward_detail, "saw reward {r}; ");
                    }
                }
            }
        }
        _ => {
            let msg = format!("gt: {:?}; adversarial: {:?}", gt.is_ok(), agile.is_ok());
            results.push(CheckResult::new("training-smoke", false, msg));
            rewards_ok = false;
            reward_detail = "runs failed".into();
        }
    }
    if rewards_ok {
        reward_detail = "distinct rewards within {0, 0.1} in both regimes".into();
    }
    results.push(CheckResult::new("rewards-discipline", rewards_ok, reward_detail));
    results
}

pub fn check_fine_tune_freeze(templates: &TemplateSet) -> CheckResult {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let mut policy: PolicyParams<f32> = init_policy(&cfg.policy_model(), &mut rng);
    let disc: DiscParams<f32> = init_disc(&cfg.disc_model(), &mut rng);
    let setup = RunSetup {
        cfg: &cfg,
        source: RewardSource::RewardModel { frozen: true },
        dataset: None,
        modifier: EnvModifier::immovable_red_rects(),
        gen_opts: GenOptions {
            filter: InstructionFilter::RedRectBringTo,
            ..GenOptions::default()
        },
        templates,
        seed: 47,
        max_env_steps: 300,
        metrics_every: 2,
        checkpoint: None,
    };
    // fine_tune panics if the reward model's parameters change.
    match agile_trainer::fine_tune(&mut policy, &disc, &setup, |_, _| false) {
        Ok(summary) => CheckResult::new(
            "fine-tune-freeze",
            summary.env_steps >= 300,
            format!(
                "{} steps under the immovable modifier; reward model bit-identical",
                summary.env_steps
            ),
        ),
        Err(e) => CheckResult::new("fine-tune-freeze", false, format!("run failed: {e}")),
    }
}

pub fn check_reproducibility(templates: &TemplateSet) -> CheckResult {
    let cfg = tiny_config();
    let dir = std::env::temp_dir().join(format!("agile-verify-{}", std::process::id()));
    let run = |tag: &str| {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let mut policy: PolicyParams<f32> = init_policy(&cfg.policy_model(), &mut rng);
        let mut disc: DiscParams<f32> = init_disc(&cfg.disc_model(), &mut rng);
        let dataset = build_dataset(
            Task::Relations,
            16,
            &mut rng.clone(),
            48,
            &GenOptions::default(),
            templates,
        );
        let ckpt_dir = dir.join(tag);
        let setup = RunSetup {
            cfg: &cfg,
            source: RewardSource::RewardModel { frozen: false },
            dataset: Some(&dataset),
            modifier: EnvModifier::NONE,
            gen_opts: GenOptions::default(),
            templates,
            seed: 48,
            max_env_steps: 400,
            metrics_every: 2,
            checkpoint: Some(agile_trainer::CheckpointPlan {
                dir: ckpt_dir.clone(),
                every_points: 0,
            }),
        };
        let summary =
            run_agile(&mut policy, Some(&mut disc), &setup, |_, _| false).expect("smoke run");
        let bytes = std::fs::read(ckpt_dir.join("final.gluc")).expect("final checkpoint");
        (summary.metrics, bytes)
    };
    let (metrics_a, ckpt_a) = run("a");
    let (metrics_b, ckpt_b) = run("b");
    let _ = std::fs::remove_dir_all(&dir);
    let pass = metrics_a == metrics_b && ckpt_a == ckpt_b;
    CheckResult::new(
        "reproducibility",
        pass,
        format!(
            "same-seed runs: metrics identical = {}, checkpoint bytes identical = {}",
            metrics_a == metrics_b,
            ckpt_a == ckpt_b
        ),
    )
}

/// Runs every check. The config-format guard is exercised implicitly: an
/// invalid default would fail `tiny_config`'s runs.
pub fn run_verify(templates: &TemplateSet) -> Vec<CheckResult> {
    let mut results = vec![
        check_grammar_counts(),
        check_arrangement_combinatorics(),
        check_generator_statistics(),
        check_semantics_oracle(templates),
        check_gradients(),
        check_filtering_arithmetic(),
        check_column_norm_clipping(templates),
    ];
    results.extend(check_training_smoke(templates));
    results.push(check_fine_tune_freeze(templates));
    results.push(check_reproducibility(templates));
    results
}

/// True when every check passed.
pub fn all_pass(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.pass)
}
