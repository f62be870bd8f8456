//! Discriminator update behavior on a small separable problem.

use agile_trainer::{discriminator_step, negative_draw_count, OptimConfig, ReplayBuffer, RmsProp, TrainerConfig};
use instance_gen::{build_dataset, GenOptions, InstanceStream, Task};
use neural_substrate::{init_disc, DiscParams, ParamKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reward_semantics::TemplateSet;

fn tiny_cfg() -> TrainerConfig {
    let mut cfg = TrainerConfig::default();
    cfg.disc_batch = 8;
    cfg.rho = 0.5;
    cfg.stem_c1 = 2;
    cfg.lstm_c2 = 2;
    cfg.trunk_c = 4;
    cfg.hidden = 8;
    // Test-scale learning rate; the update rule is what is under test.
    cfg.disc_optim = OptimConfig { lr: 0.01, decay: 0.9, epsilon: 1e-10, clip: 25.0 };
    cfg.validate().unwrap();
    cfg
}

fn column_norms_bounded(disc: &DiscParams<f32>) {
    let mut d = disc.clone();
    for (name, t, kind) in d.tensors_mut() {
        if kind != ParamKind::Weight {
            continue;
        }
        let cols = *t.shape().last().unwrap();
        let rows = t.len() / cols;
        for u in 0..cols {
            let sumsq: f64 = (0..rows)
                .map(|j| {
                    let v = t.data()[j * cols + u] as f64;
                    v * v
                })
                .sum();
            assert!(
                sumsq <= 1.0 + 1e-6,
                "{name} column {u} has squared norm {sumsq} after update"
            );
        }
    }
}

#[test]
fn disc_updates_separate_goals_from_starts() {
    let cfg = tiny_cfg();
    let templates = TemplateSet::builtin();
    let mut data_rng = ChaCha8Rng::seed_from_u64(100);
    let dataset = build_dataset(
        Task::Relations,
        24,
        &mut data_rng,
        100,
        &GenOptions::default(),
        &templates,
    );

    // Negatives: episode start states, which generation guarantees are not
    // already goal states.
    let mut buffer = ReplayBuffer::new(500);
    let mut stream = InstanceStream::new(Task::Relations, 101, GenOptions::default());
    for _ in 0..60 {
        let inst = stream.next_instance();
        buffer.push(inst.instruction, inst.initial);
    }

    let mut disc: DiscParams<f32> =
        init_disc(&cfg.disc_model(), &mut ChaCha8Rng::seed_from_u64(7));
    let mut optim = RmsProp::new(cfg.disc_optim);
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let mut losses = Vec::new();
    for _ in 0..40 {
        let diag = discriminator_step(&mut disc, &dataset, &mut buffer, &cfg, &mut optim, &mut rng);
        assert_eq!(diag.drawn_negatives, negative_draw_count(cfg.disc_batch, cfg.rho));
        assert!(diag.loss.is_finite());
        column_norms_bounded(&disc);
        losses.push(diag.loss);
    }
    assert_eq!(buffer.replacement_draws, 0, "60 stored pairs cover a draw of 8");

    let early: f64 = losses[..5].iter().sum::<f64>() / 5.0;
    let late: f64 = losses[losses.len() - 5..].iter().sum::<f64>() / 5.0;
    assert!(
        late < early,
        "cross entropy should fall on separable data: early {early:.4}, late {late:.4}"
    );
    let diag = discriminator_step(&mut disc, &dataset, &mut buffer, &cfg, &mut optim, &mut rng);
    assert!(
        diag.mean_positive_score > diag.mean_negative_score,
        "goal states should outscore start states: {} vs {}",
        diag.mean_positive_score,
        diag.mean_negative_score
    );
}

#[test]
fn disc_step_tolerates_a_short_buffer() {
    let cfg = tiny_cfg();
    let templates = TemplateSet::builtin();
    let mut data_rng = ChaCha8Rng::seed_from_u64(200);
    let dataset = build_dataset(
        Task::Relations,
        4,
        &mut data_rng,
        200,
        &GenOptions::default(),
        &templates,
    );

    let mut buffer = ReplayBuffer::new(500);
    let mut stream = InstanceStream::new(Task::Relations, 201, GenOptions::default());
    for _ in 0..2 {
        let inst = stream.next_instance();
        buffer.push(inst.instruction, inst.initial);
    }

    let mut disc: DiscParams<f32> =
        init_disc(&cfg.disc_model(), &mut ChaCha8Rng::seed_from_u64(9));
    let mut optim = RmsProp::new(cfg.disc_optim);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let diag = discriminator_step(&mut disc, &dataset, &mut buffer, &cfg, &mut optim, &mut rng);
    assert!(diag.loss.is_finite());
    assert_eq!(buffer.replacement_draws, 1, "a draw of 8 from 2 items needs replacement");
}
