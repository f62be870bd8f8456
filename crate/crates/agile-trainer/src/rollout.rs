//! Experience collection: reward wiring, rollouts, and discounted returns.

use gridlu_env::{render, Action, EnvModifier, WorldState};
use instance_gen::TaskInstance;
use instruction_lang::Instruction;
use neural_substrate::{encode_image, DiscParams, PolicyParams, Scalar, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reward_semantics::{success, TemplateSet};

use crate::config::TrainerConfig;

/// Where the training reward comes from. Ground-truth training and
/// reward-model training share every other code path; this enum is the
/// single switch point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardSource {
    /// Reward from the ground-truth checker.
    GroundTruth,
    /// Reward from the discriminator's modelled probability. With
    /// `frozen: true` the discriminator only scores states and is never
    /// updated (the fine-tuning regime).
    RewardModel { frozen: bool },
}

/// Thresholded modelled reward: `reward_scale` when the discriminator
/// probability exceeds one half, otherwise zero. The comparison is strict,
/// so emitted rewards always lie in `{0, reward_scale}`.
pub fn modelled_reward(p: f64, reward_scale: f64) -> f64 {
    if p > 0.5 {
        reward_scale
    } else {
        0.0
    }
}

/// Discounted n-step returns. `returns[t] = rewards[t] + gamma *
/// returns[t+1]`, seeded past the end with `bootstrap` (zero at a true
/// episode end, the critic's value estimate at a rollout cut).
pub fn compute_returns(rewards: &[f64], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for (r, out) in rewards.iter().zip(returns.iter_mut()).rev() {
        acc = r + gamma * acc;
        *out = acc;
    }
    returns
}

/// An episode in progress: fixed instruction, current state, and the number
/// of environment steps taken so far.
#[derive(Debug, Clone)]
pub struct EpisodeCursor {
    pub instruction: Instruction,
    pub state: WorldState,
    pub t: usize,
}

impl EpisodeCursor {
    pub fn new(instance: &TaskInstance) -> Self {
        EpisodeCursor {
            instruction: instance.instruction.clone(),
            state: instance.initial,
            t: 0,
        }
    }

    pub fn done(&self, cfg: &TrainerConfig) -> bool {
        self.t >= cfg.episode_len
    }
}

/// A contiguous slice of one episode: `states` holds the `n + 1` visited
/// states, `actions[t]` moved `states[t]` to `states[t + 1]`, and
/// `rewards[t]` is the reward for arriving in `states[t + 1]`.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub instruction: Instruction,
    pub states: Vec<WorldState>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Value to bootstrap returns with past the final state.
    pub bootstrap: f64,
    /// True when the episode ended at this rollout's last state.
    pub terminal: bool,
    /// True when this rollout started the episode (t was zero).
    pub from_start: bool,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn final_state(&self) -> &WorldState {
        self.states.last().expect("rollout holds at least the start state")
    }
}

/// Renders and encodes a state for network input.
pub fn state_image<F: Scalar>(state: &WorldState) -> Tensor<F> {
    encode_image(&render(state))
}

/// Samples an action index from a probability vector.
pub fn sample_action<F: Scalar>(probs: &[F], rng: &mut ChaCha8Rng) -> Action {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.to_f64();
        if r < acc {
            return Action::ALL[i];
        }
    }
    *Action::ALL.last().unwrap()
}

/// Runs the policy for up to `rollout_len` steps (fewer if the episode ends
/// sooner), advancing `cursor` in place. Rewards come from `source`:
/// the ground-truth checker, or the thresholded score of `disc`. The
/// bootstrap is zero at a true episode end and the critic's estimate of the
/// cut state otherwise.
///
/// When `feed` is provided, every state visited by this rollout is appended
/// to it in visit order (the start state only for episode-opening rollouts,
/// so an episode contributes each state exactly once).
pub fn collect_rollout(
    policy: &PolicyParams<f32>,
    disc: Option<&DiscParams<f32>>,
    cursor: &mut EpisodeCursor,
    modifier: &EnvModifier,
    source: RewardSource,
    cfg: &TrainerConfig,
    templates: &TemplateSet,
    rng: &mut ChaCha8Rng,
    mut feed: Option<&mut crate::buffer::ReplayBuffer>,
) -> Rollout {
    assert!(!cursor.done(cfg), "cannot collect from a finished episode");
    if source == RewardSource::GroundTruth {
        assert!(disc.is_none(), "ground-truth rewards take no discriminator");
    } else {
        assert!(disc.is_some(), "modelled rewards require a discriminator");
    }

    let from_start = cursor.t == 0;
    let n = cfg.rollout_len.min(cfg.episode_len - cursor.t);
    let mut states = Vec::with_capacity(n + 1);
    let mut actions = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);

    states.push(cursor.state);
    if from_start {
        if let Some(buf) = feed.as_deref_mut() {
            buf.push(cursor.instruction.clone(), cursor.state);
        }
    }

    let mut image = state_image::<f32>(&cursor.state);
    for _ in 0..n {
        let eval = policy
            .forward(&cursor.instruction, &image)
            .expect("policy trunk supports the task's instructions");
        let action = sample_action(&eval.probs, rng);
        let next = gridlu_env::step(&cursor.state, action, modifier);
        let next_image = state_image::<f32>(&next);

        let reward = match source {
            RewardSource::GroundTruth => {
                if success(&cursor.instruction, &next, templates) {
                    cfg.reward_scale
                } else {
                    0.0
                }
            }
            RewardSource::RewardModel { .. } => {
                let d = disc
                    .unwrap()
                    .forward(&cursor.instruction, &next_image)
                    .expect("discriminator trunk supports the task's instructions");
                modelled_reward(d.p.to_f64(), cfg.reward_scale)
            }
        };

        states.push(next);
        actions.push(action);
        rewards.push(reward);
        if let Some(buf) = feed.as_deref_mut() {
            buf.push(cursor.instruction.clone(), next);
        }

        cursor.state = next;
        cursor.t += 1;
        image = next_image;
    }

    let terminal = cursor.done(cfg);
    let bootstrap = if terminal {
        0.0
    } else {
        policy
            .forward(&cursor.instruction, &image)
            .expect("policy trunk supports the task's instructions")
            .value
            .to_f64()
    };

    Rollout {
        instruction: cursor.instruction.clone(),
        states,
        actions,
        rewards,
        bootstrap,
        terminal,
        from_start,
    }
}
