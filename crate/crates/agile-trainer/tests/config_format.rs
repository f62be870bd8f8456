//! The flat `key = value` config format and its validation.

use agile_trainer::{ConfigError, TrainerConfig};
use instance_gen::Task;
use neural_substrate::TrunkKind;

#[test]
fn defaults_match_the_training_table() {
    let cfg = TrainerConfig::default();
    assert_eq!(cfg.policy_optim.lr, 3e-4);
    assert_eq!(cfg.policy_optim.decay, 0.99);
    assert_eq!(cfg.policy_optim.epsilon, 0.1);
    assert_eq!(cfg.policy_optim.clip, 40.0);
    assert_eq!(cfg.disc_optim.lr, 5e-4);
    assert_eq!(cfg.disc_optim.decay, 0.9);
    assert_eq!(cfg.disc_optim.epsilon, 1e-10);
    assert_eq!(cfg.disc_optim.clip, 25.0);
    assert_eq!(cfg.disc_batch, 256);
    assert_eq!(cfg.rollout_len, 15);
    assert_eq!(cfg.episode_len, 30);
    assert_eq!(cfg.gamma, 0.99);
    assert_eq!(cfg.reward_scale, 0.1);
    assert_eq!(cfg.baseline_cost, 1.0);
    assert_eq!(cfg.rp_cost, 1.0);
    assert_eq!(cfg.rp_batch, 4);
    assert_eq!(cfg.entropy_weight, 0.01);
    assert_eq!(cfg.rho, 0.25);
    assert_eq!(cfg.buffer_capacity, 100_000);
    assert_eq!(cfg.policy_workers, 15);
    assert_eq!(cfg.lambda, 0.0);
    assert!(!cfg.all_workers_feed_buffer);
    cfg.validate().unwrap();
}

#[test]
fn arrangements_lengthen_episodes() {
    let cfg = TrainerConfig::for_task(Task::Arrangements);
    assert_eq!(cfg.episode_len, 45);
    assert_eq!(cfg.rollout_len, 30);
    assert_eq!(cfg.policy_trunk, TrunkKind::FilmLstm);
    cfg.validate().unwrap();
}

#[test]
fn config_round_trips_through_the_flat_format() {
    let mut cfg = TrainerConfig::for_task(Task::Arrangements);
    cfg.rho = 0.5;
    cfg.disc_batch = 64;
    cfg.stem_c1 = 4;
    let text = cfg.to_config_string();
    let back = TrainerConfig::from_config_string(&text).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn parser_accepts_comments_and_partial_files() {
    let text = "# tuning overrides\nrho = 0.5   # retain half\n\ndisc_batch = 64\n";
    let cfg = TrainerConfig::from_config_string(text).unwrap();
    assert_eq!(cfg.rho, 0.5);
    assert_eq!(cfg.disc_batch, 64);
    // Everything else keeps the default.
    assert_eq!(cfg.policy_workers, 15);
}

#[test]
fn parser_rejects_unknown_keys_and_bad_values() {
    let err = TrainerConfig::from_config_string("rhoo = 0.5\n").unwrap_err();
    assert!(matches!(err, ConfigError::UnknownKey(1, _)), "{err}");
    let err = TrainerConfig::from_config_string("rho = banana\n").unwrap_err();
    assert!(matches!(err, ConfigError::BadValue(1, _, _)), "{err}");
    let err = TrainerConfig::from_config_string("rho 0.5\n").unwrap_err();
    assert!(matches!(err, ConfigError::BadLine(1, _)), "{err}");
}

#[test]
fn validation_guards_the_invariants() {
    let cases: Vec<Box<dyn Fn(&mut TrainerConfig)>> = vec![
        Box::new(|c| c.rho = 0.0),
        Box::new(|c| c.rho = 1.5),
        Box::new(|c| c.disc_batch = 7),
        Box::new(|c| c.rollout_len = 0),
        Box::new(|c| c.episode_len = 5),
        Box::new(|c| c.lambda = 0.9),
        Box::new(|c| c.rp_batch = 3),
        Box::new(|c| c.policy_workers = 0),
        Box::new(|c| c.buffer_capacity = 0),
        Box::new(|c| c.gamma = 1.5),
        Box::new(|c| c.task = Task::Arrangements),
    ];
    for (i, mutate) in cases.iter().enumerate() {
        let mut cfg = TrainerConfig::default();
        mutate(&mut cfg);
        assert!(cfg.validate().is_err(), "case {i} should fail validation");
    }
}

#[test]
fn rho_one_disables_filtering_but_validates() {
    let mut cfg = TrainerConfig::default();
    cfg.rho = 1.0;
    cfg.validate().unwrap();
}
