//! Actor-critic policy updates and the auxiliary reward-prediction update.

use gridlu_env::WorldState;
use instruction_lang::Instruction;
use neural_substrate::{PolicyParams, Scalar};
use rand_chacha::ChaCha8Rng;

use crate::buffer::RpBuffer;
use crate::config::TrainerConfig;
use crate::optim::RmsProp;
use crate::rollout::{compute_returns, state_image, Rollout};

/// Loss breakdown for one rollout's policy objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyObjective {
    /// `-sum_t adv_t * ln pi(a_t | s_t)` with the advantage held constant.
    pub pg_loss: f64,
    /// Mean squared error of the value head against the returns.
    pub value_loss: f64,
    /// Sum over steps of the policy entropy.
    pub entropy_sum: f64,
    /// Steps in the rollout.
    pub steps: usize,
    /// Full minimized objective:
    /// `pg_loss - entropy_weight * entropy_sum + baseline_cost * value_loss`.
    pub total: f64,
}

impl PolicyObjective {
    pub fn mean_entropy(&self) -> f64 {
        self.entropy_sum / self.steps.max(1) as f64
    }
}

/// Accumulates the gradient of the full policy objective for one rollout
/// into `grads` and returns the objective. The objective for a rollout of
/// `n` steps with returns `R_t` is
///
/// ```text
///   sum_t [ -adv_t * ln pi(a_t | s_t) - entropy_weight * H(pi(. | s_t)) ]
///       + baseline_cost * (1/n) * sum_t (V(s_t) - R_t)^2
/// ```
///
/// where `adv_t = R_t - V(s_t)` is treated as a constant (the policy
/// gradient does not flow through the baseline, and the baseline loss does
/// not flow through the advantage). Returns are also constants: at rollout
/// cuts they bootstrap from the critic's estimate, but that estimate enters
/// the update as a number, not as a differentiable node.
///
/// Both the training loop and the finite-difference verification call this
/// function, so what is tested is what runs.
pub fn accumulate_policy_gradient<F: Scalar>(
    policy: &PolicyParams<F>,
    instruction: &Instruction,
    states: &[WorldState],
    actions_idx: &[usize],
    returns: &[f64],
    cfg: &TrainerConfig,
    grads: &mut PolicyParams<F>,
) -> PolicyObjective {
    let n = actions_idx.len();
    assert!(n > 0, "empty rollout");
    assert!(states.len() >= n, "need a state for every action");
    assert_eq!(returns.len(), n, "need a return for every action");

    let mut pg_loss = 0.0;
    let mut value_loss = 0.0;
    let mut entropy_sum = 0.0;

    for t in 0..n {
        let image = state_image::<F>(&states[t]);
        let eval = policy
            .forward(instruction, &image)
            .expect("policy trunk supports the task's instructions");
        let probs: Vec<f64> = eval.probs.iter().map(|p| p.to_f64()).collect();
        let value = eval.value.to_f64();
        let ret = returns[t];
        let adv = ret - value;
        let a = actions_idx[t];

        let entropy: f64 = probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum();
        pg_loss -= adv * probs[a].max(f64::MIN_POSITIVE).ln();
        value_loss += (value - ret) * (value - ret) / n as f64;
        entropy_sum += entropy;

        // d/dz_j of the step's loss, in logit space:
        //   adv * (pi_j - [j = a])           (policy gradient)
        // + alpha * pi_j * (ln pi_j + H)     (negated entropy bonus)
        let alpha = cfg.entropy_weight;
        let dlogits: Vec<F> = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let indicator = if j == a { 1.0 } else { 0.0 };
                let pg = adv * (p - indicator);
                let ent = if p > 0.0 { alpha * p * (p.ln() + entropy) } else { 0.0 };
                F::from_f64(pg + ent)
            })
            .collect();
        let dvalue = F::from_f64(cfg.baseline_cost * 2.0 * (value - ret) / n as f64);

        policy.backward(&eval, &dlogits, dvalue, None, grads);
    }

    let total = pg_loss - cfg.entropy_weight * entropy_sum + cfg.baseline_cost * value_loss;
    PolicyObjective {
        pg_loss,
        value_loss,
        entropy_sum,
        steps: n,
        total,
    }
}

/// One A3C update from a rollout: n-step returns, gradient of the full
/// objective, global-norm clip, RMSProp step.
pub fn policy_update(
    policy: &mut PolicyParams<f32>,
    rollout: &Rollout,
    cfg: &TrainerConfig,
    optim: &mut RmsProp<f32>,
) -> PolicyObjective {
    let returns = compute_returns(&rollout.rewards, cfg.gamma, rollout.bootstrap);
    let actions_idx: Vec<usize> = rollout.actions.iter().map(|a| a.index()).collect();
    let mut grads = policy.zeros_like();
    let objective = accumulate_policy_gradient(
        policy,
        &rollout.instruction,
        &rollout.states,
        &actions_idx,
        &returns,
        cfg,
        &mut grads,
    );
    optim.step(policy.tensors_mut(), grads.tensors_mut());
    objective
}

/// One auxiliary reward-prediction update: a balanced batch of recent
/// states is classified as rewarded versus unrewarded through the policy's
/// reward-prediction head (class order: positive, zero), with cross-entropy
/// weighted by `rp_cost`. Skipped (returning `None`) while either class is
/// still unseen. This is its own gradient and its own optimizer step, taken
/// once per rollout in the ground-truth regime.
pub fn reward_prediction_update(
    policy: &mut PolicyParams<f32>,
    rp: &RpBuffer,
    cfg: &TrainerConfig,
    optim: &mut RmsProp<f32>,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    if !rp.has_both_classes() {
        return None;
    }
    let half = cfg.rp_batch / 2;
    let mut grads = policy.zeros_like();
    let mut loss = 0.0;
    let scale = cfg.rp_cost / cfg.rp_batch as f64;
    for k in 0..cfg.rp_batch {
        let rewarded = k < half;
        let (instruction, state) = rp.draw(rewarded, rng);
        let image = state_image::<f32>(&state);
        let eval = policy
            .forward(&instruction, &image)
            .expect("policy trunk supports the task's instructions");
        let target = if rewarded { 0 } else { 1 };
        let p: [f64; 2] = [eval.rp_probs[0].to_f64(), eval.rp_probs[1].to_f64()];
        loss -= scale * p[target].max(f64::MIN_POSITIVE).ln();
        let drp = [
            (p[0] - if target == 0 { 1.0 } else { 0.0 }) * scale,
            (p[1] - if target == 1 { 1.0 } else { 0.0 }) * scale,
        ];
        let drp = [f32::from_f64(drp[0]), f32::from_f64(drp[1])];
        let dlogits = vec![0.0f32; eval.probs.len()];
        policy.backward(&eval, &dlogits, 0.0, Some(&drp), &mut grads);
    }
    optim.step(policy.tensors_mut(), grads.tensors_mut());
    Some(loss)
}
