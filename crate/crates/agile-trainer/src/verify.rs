//! Finite-difference verification of the full policy objective on a toy
//! decision process, driven through the production gradient code.

use gridlu_env::{Action, WorldState};
use instance_gen::{GenOptions, InstanceStream, Task};
use instruction_lang::Instruction;
use neural_substrate::{
    compare_grads, fd_gradient, get_flat, set_flat, ModelConfig, PolicyParams, Scalar, TrunkKind,
    VerifyCase,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::TrainerConfig;
use crate::policy::accumulate_policy_gradient;
use crate::rollout::{compute_returns, state_image};

/// Objective value with the advantages held at the fixed `adv0`, matching
/// the stop-gradient convention of `accumulate_policy_gradient`: the
/// policy-gradient term does not differentiate through the baseline, while
/// the value term does differentiate through `V`.
fn objective_value(
    policy: &PolicyParams<f64>,
    instruction: &Instruction,
    states: &[WorldState],
    actions_idx: &[usize],
    returns: &[f64],
    adv0: &[f64],
    cfg: &TrainerConfig,
) -> f64 {
    let n = actions_idx.len();
    let mut pg = 0.0;
    let mut mse = 0.0;
    let mut entropy_sum = 0.0;
    for t in 0..n {
        let eval = policy
            .forward(instruction, &state_image::<f64>(&states[t]))
            .expect("policy trunk supports the task's instructions");
        let probs: Vec<f64> = eval.probs.iter().map(|p| p.to_f64()).collect();
        let value = eval.value;
        pg -= adv0[t] * probs[actions_idx[t]].ln();
        mse += (value - returns[t]) * (value - returns[t]) / n as f64;
        entropy_sum += probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>();
    }
    pg - cfg.entropy_weight * entropy_sum + cfg.baseline_cost * mse
}

fn toy_case(name: &str, rewards: &[f64], bootstrap: f64, seed: u64) -> VerifyCase {
    // Narrow network, full-size rendered inputs: the code path under test
    // is exactly the training path.
    let model_cfg = ModelConfig {
        trunk: TrunkKind::Nmn,
        stem_c1: 2,
        lstm_c2: 2,
        trunk_c: 2,
        hidden: 3,
        ..ModelConfig::default()
    };
    let cfg = TrainerConfig::default();
    // Every tensor is drawn nonzero: zero biases and FiLM tables would put
    // rendered backgrounds exactly on activation kinks, where one-sided
    // finite differences are meaningless.
    let mut policy = PolicyParams::<f64>::new(&model_cfg);
    let mut prng = ChaCha8Rng::seed_from_u64(seed);
    for (_, t, _) in policy.tensors_mut() {
        for v in t.data_mut() {
            *v = 0.6 * (prng.gen::<f64>() - 0.5);
        }
    }

    // A fixed trajectory through real environment states.
    let mut stream = InstanceStream::new(Task::Relations, seed ^ 0x5eed, GenOptions::default());
    let instance = stream.next_instance();
    let actions = [Action::Left, Action::Up, Action::Interact, Action::Down, Action::Right];
    let mut states = vec![instance.initial];
    for a in actions.iter().take(rewards.len()) {
        let next = gridlu_env::step(states.last().unwrap(), *a, &gridlu_env::EnvModifier::NONE);
        states.push(next);
    }
    let actions_idx: Vec<usize> = actions.iter().take(rewards.len()).map(|a| a.index()).collect();
    let returns = compute_returns(rewards, cfg.gamma, bootstrap);

    // Advantages captured at the unperturbed parameters.
    let adv0: Vec<f64> = (0..rewards.len())
        .map(|t| {
            let eval = policy
                .forward(&instance.instruction, &state_image::<f64>(&states[t]))
                .unwrap();
            returns[t] - eval.value
        })
        .collect();

    let mut grads = policy.zeros_like();
    let objective = accumulate_policy_gradient(
        &policy,
        &instance.instruction,
        &states,
        &actions_idx,
        &returns,
        &cfg,
        &mut grads,
    );
    let direct = objective_value(
        &policy,
        &instance.instruction,
        &states,
        &actions_idx,
        &returns,
        &adv0,
        &cfg,
    );
    assert!(
        (objective.total - direct).abs() <= 1e-9 * objective.total.abs().max(1.0),
        "objective evaluator disagrees with the gradient path: {} vs {}",
        objective.total,
        direct
    );

    let analytic = get_flat(grads.tensors_mut());
    let theta0 = get_flat(policy.tensors_mut());
    let instruction = instance.instruction.clone();
    let mut probe = policy.clone();
    let numeric = fd_gradient(
        |x| {
            set_flat(probe.tensors_mut(), x);
            objective_value(&probe, &instruction, &states, &actions_idx, &returns, &adv0, &cfg)
        },
        &theta0,
    );
    VerifyCase {
        name: name.to_string(),
        report: compare_grads(&analytic, &numeric),
    }
}

/// Finite-difference checks of the complete policy objective (policy
/// gradient with constant advantages, entropy bonus, and baseline mean
/// squared error) through `accumulate_policy_gradient`, on fabricated
/// rollouts over real environment states: one ending an episode, one cut
/// short with a bootstrap value.
pub fn verify_policy_objective() -> Vec<VerifyCase> {
    vec![
        toy_case("policy-objective-terminal", &[0.0, 0.0, 0.1], 0.0, 21),
        toy_case("policy-objective-bootstrap", &[0.0, 0.1, 0.0], 0.07, 22),
    ]
}
