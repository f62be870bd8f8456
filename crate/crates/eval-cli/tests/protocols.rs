//! Protocol-level tests: evaluation determinism and invariants, confusion
//! tracking against doctored reward models, sweep bookkeeping, the
//! red-square experiment mechanics, and checkpoint recovery.

use agile_trainer::{
    run_agile, CheckpointPlan, RewardSource, RunSetup, TrainerConfig,
};
use eval_cli::{
    collect_probe_pairs, evaluate, load_trained, pick_checkpoint, red_square_experiment,
    run_sweep, track_confusion, ActionSelection, EvalOptions, RedSquareSetup, SweepSpec,
    SweepVariable,
};
use gridlu_env::EnvModifier;
use instance_gen::{build_dataset, GenOptions, InstanceStream, Task};
use neural_substrate::{init_disc, init_policy, meta_get, read_meta, DiscParams, PolicyParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reward_semantics::TemplateSet;

fn tiny_cfg(task: Task) -> TrainerConfig {
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
        ..TrainerConfig::for_task(task)
    }
}

fn fresh_policy(cfg: &TrainerConfig, seed: u64) -> PolicyParams<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_policy(&cfg.policy_model(), &mut rng)
}

/// A reward model that outputs the same score for every input: zero
/// weights, ReLU-passed hidden bias of one, output weights summing to the
/// wanted logit.
fn constant_disc(cfg: &TrainerConfig, logit: f32) -> DiscParams<f32> {
    let mut disc = DiscParams::<f32>::new(&cfg.disc_model());
    let hidden = cfg.hidden as f32;
    for (name, tensor, _) in disc.tensors_mut() {
        match name.as_str() {
            "hidden.b" => tensor.data_mut().fill(1.0),
            "out.w" => tensor.data_mut().fill(logit / hidden),
            _ => {}
        }
    }
    disc
}

#[test]
fn same_seed_evaluations_are_identical_and_consistent() {
    let templates = TemplateSet::builtin();
    let cfg = tiny_cfg(Task::Relations);
    let policy = fresh_policy(&cfg, 3);
    let opts = EvalOptions::default();
    let a = evaluate(&policy, &cfg, 40, 9, &opts, &templates);
    let b = evaluate(&policy, &cfg, 40, 9, &opts, &templates);
    assert_eq!(a, b);

    assert_eq!(a.episodes, 40);
    assert_eq!(a.success_rate, a.successes as f64 / 40.0);
    let stat_episodes: usize = a.per_instruction.iter().map(|s| s.episodes).sum();
    let stat_successes: usize = a.per_instruction.iter().map(|s| s.successes).sum();
    assert_eq!(stat_episodes, a.episodes);
    assert_eq!(stat_successes, a.successes);
    assert!(a.split.is_none(), "Relations reports have no block split");
    assert_eq!(a.config_digest.len(), 16);
    assert_eq!(a.config_digest, eval_cli::config_digest(&cfg));

    let c = evaluate(&policy, &cfg, 40, 10, &opts, &templates);
    assert_ne!(a.per_instruction, c.per_instruction, "fresh seed, fresh instances");
}

#[test]
fn unsolved_starts_mean_zero_success_without_acting() {
    let templates = TemplateSet::builtin();
    let cfg = tiny_cfg(Task::Relations);
    let policy = fresh_policy(&cfg, 4);
    // Zero steps: the final state is the start state, which generation
    // guarantees is not a goal state.
    let opts = EvalOptions {
        episode_len: Some(0),
        ..EvalOptions::default()
    };
    let report = evaluate(&policy, &cfg, 60, 11, &opts, &templates);
    assert_eq!(report.successes, 0);
    assert_eq!(report.success_rate, 0.0);
}

#[test]
fn arrangements_report_splits_by_block_count() {
    let templates = TemplateSet::builtin();
    let cfg = tiny_cfg(Task::Arrangements);
    let policy = fresh_policy(&cfg, 5);
    let opts = EvalOptions {
        // Short episodes keep the test quick; the split is what matters.
        episode_len: Some(3),
        ..EvalOptions::default()
    };
    let report = evaluate(&policy, &cfg, 30, 12, &opts, &templates);
    let split = report.split.expect("Arrangements reports carry the split");
    assert_eq!(split.four_block.episodes + split.eight_block.episodes, 30);
    assert!(split.four_block.episodes > 0 && split.eight_block.episodes > 0);
    assert_eq!(
        split.four_block.successes + split.eight_block.successes,
        report.successes
    );
    let text = report.to_file_string();
    assert!(text.contains("four_block = "));
    assert!(text.contains("eight_block = "));
}

#[test]
fn greedy_selection_is_deterministic_per_state() {
    let templates = TemplateSet::builtin();
    let cfg = tiny_cfg(Task::Relations);
    let policy = fresh_policy(&cfg, 6);
    let opts = EvalOptions {
        selection: ActionSelection::Greedy,
        ..EvalOptions::default()
    };
    let a = evaluate(&policy, &cfg, 20, 13, &opts, &templates);
    let b = evaluate(&policy, &cfg, 20, 13, &opts, &templates);
    assert_eq!(a, b);
}

#[test]
fn confusion_tracking_matches_doctored_reward_models() {
    let templates = TemplateSet::builtin();
    let cfg = tiny_cfg(Task::Relations);
    // Probes from unsolved episode starts: all ground-truth negatives.
    let mut stream = InstanceStream::new(Task::Relations, 77, GenOptions::default());
    let probes: Vec<_> = (0..50)
        .map(|_| {
            let inst = stream.next_instance();
            (inst.instruction, inst.initial)
        })
        .collect();

    // Constant 0.9: every negative probe becomes a false positive.
    let optimist = constant_disc(&cfg, 2.197);
    let records = track_confusion(&optimist, vec![(0, probes.clone())], &templates);
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].total(), 50);
    assert_eq!(records[0].fp, 50);
    assert_eq!(records[0].fp_rate(), 1.0);
    assert_eq!(records[0].accuracy(), 0.0);

    // Constant 0.1: perfect on all-negative probes; fp = fn = 0.
    let pessimist = constant_disc(&cfg, -2.197);
    let records = track_confusion(&pessimist, vec![(1, probes)], &templates);
    assert_eq!(records[0].tn, 50);
    assert_eq!(records[0].fp, 0);
    assert_eq!(records[0].fn_, 0);
    assert_eq!(records[0].fp_rate(), 0.0);
    assert_eq!(records[0].fn_rate(), 0.0);
    assert_eq!(records[0].accuracy(), 1.0);
}

#[test]
fn probe_pairs_are_deterministic_and_exactly_sized() {
    let templates = TemplateSet::builtin();
    let cfg = tiny_cfg(Task::Relations);
    let policy = fresh_policy(&cfg, 7);
    let a = collect_probe_pairs(&policy, &cfg, &GenOptions::default(), &templates, 57, 14);
    let b = collect_probe_pairs(&policy, &cfg, &GenOptions::default(), &templates, 57, 14);
    assert_eq!(a.len(), 57);
    assert_eq!(a, b);
}

#[test]
fn sweeps_report_every_point_and_survive_bad_points() {
    let templates = TemplateSet::builtin();
    let spec = SweepSpec {
        base: tiny_cfg(Task::Relations),
        // rho = 0 is rejected by config validation: the sweep must record
        // the failure and keep going.
        variable: SweepVariable::Rho(vec![0.25, 0.0]),
        seeds: vec![1],
        budget_env_steps: 400,
        default_dataset_size: 12,
        eval_episodes: 4,
        metrics_every: 4,
        gen_opts: GenOptions::default(),
    };
    let report = run_sweep(&spec, &templates);
    assert_eq!(report.rows.len(), 2, "rows = grid size x seeds");
    let ok = &report.rows[0];
    assert_eq!(ok.point, "rho=0.25");
    assert_eq!(ok.note, "ok");
    assert!(ok.max_success >= ok.final_success);
    assert!(ok.env_steps >= 400);
    let bad = &report.rows[1];
    assert_eq!(bad.point, "rho=0");
    assert!(bad.note.starts_with("failed:"), "note: {}", bad.note);
    assert!(bad.max_success.is_nan());
    let table = report.table();
    assert!(table.contains("rho=0.25") && table.contains("failed:"));
}

#[test]
fn red_square_experiment_reports_all_four_evaluations() {
    let templates = TemplateSet::builtin();
    let cfg = tiny_cfg(Task::Relations);
    let mut policy = fresh_policy(&cfg, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let disc: DiscParams<f32> = init_disc(&cfg.disc_model(), &mut rng);
    let setup = RedSquareSetup {
        cfg: cfg.clone(),
        eval_episodes: 6,
        fine_tune_env_steps: 200,
        metrics_every: 4,
        seed: 15,
    };
    let report = red_square_experiment(&mut policy, &disc, &setup, &templates).unwrap();
    for eval in [
        &report.unmodified_before,
        &report.modified_before,
        &report.modified_after,
        &report.unmodified_after,
    ] {
        assert_eq!(eval.episodes, 6);
        // The filter restricts every episode to bring-to texts (no AGENT
        // operand) naming the red rect on one side.
        for stat in &eval.per_instruction {
            assert!(!stat.instruction.contains("AGENT"), "{}", stat.instruction);
            assert!(
                stat.instruction.contains("Color('red', Shape('rect', SCENE))"),
                "{}",
                stat.instruction
            );
        }
    }
    assert_eq!(
        report.recovery(),
        report.modified_after.success_rate - report.modified_before.success_rate
    );
    assert!(report.summary().contains("drop = "));
}

#[test]
fn checkpoints_recover_architecture_and_pick_by_mean_reward() {
    let templates = TemplateSet::builtin();
    let cfg = tiny_cfg(Task::Relations);
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut policy: PolicyParams<f32> = init_policy(&cfg.policy_model(), &mut rng);
    let mut disc: DiscParams<f32> = init_disc(&cfg.disc_model(), &mut rng);
    let dataset = build_dataset(Task::Relations, 12, &mut rng, 9, &GenOptions::default(), &templates);
    let setup = RunSetup {
        cfg: &cfg,
        source: RewardSource::RewardModel { frozen: false },
        dataset: Some(&dataset),
        modifier: EnvModifier::NONE,
        gen_opts: GenOptions::default(),
        templates: &templates,
        seed: 16,
        max_env_steps: 400,
        metrics_every: 2,
        checkpoint: Some(CheckpointPlan {
            dir: dir.path().to_path_buf(),
            every_points: 1,
        }),
    };
    run_agile(&mut policy, Some(&mut disc), &setup, |_, _| false).unwrap();

    let final_path = dir.path().join("final.gluc");
    let loaded = load_trained(&final_path).unwrap();
    assert_eq!(loaded.cfg, cfg);
    assert!(loaded.disc.is_some(), "adversarial checkpoints carry the reward model");
    assert!(meta_get(&loaded.meta, "env_steps").is_some());

    // Directory picking: the chosen file records the maximum mean_reward.
    let picked = pick_checkpoint(dir.path()).unwrap();
    let picked_reward: f64 = meta_get(&read_meta(&picked).unwrap(), "mean_reward")
        .unwrap()
        .parse()
        .unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) != Some("gluc") {
            continue;
        }
        let r: f64 = meta_get(&read_meta(&p).unwrap(), "mean_reward")
            .unwrap()
            .parse()
            .unwrap();
        assert!(r <= picked_reward, "{} beats the pick", p.display());
    }
    // A file path resolves to itself.
    assert_eq!(pick_checkpoint(&final_path).unwrap(), final_path);

    // Ground-truth checkpoints carry no reward model.
    let dir2 = tempfile::tempdir().unwrap();
    let mut policy2 = fresh_policy(&cfg, 10);
    let setup2 = RunSetup {
        source: RewardSource::GroundTruth,
        dataset: None,
        checkpoint: Some(CheckpointPlan {
            dir: dir2.path().to_path_buf(),
            every_points: 0,
        }),
        ..setup
    };
    run_agile(&mut policy2, None, &setup2, |_, _| false).unwrap();
    let loaded2 = load_trained(&dir2.path().join("final.gluc")).unwrap();
    assert!(loaded2.disc.is_none());

    // Corrupt files are rejected, not misread.
    let bytes = std::fs::read(&final_path).unwrap();
    let bad_path = dir.path().join("truncated.bin");
    std::fs::write(&bad_path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(load_trained(&bad_path).is_err());
}
