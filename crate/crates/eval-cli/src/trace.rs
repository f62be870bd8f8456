//! Single-episode traces with rendered frames, for offline inspection.

use crate::report::{ActionSelection, EvalOptions};
use agile_trainer::{sample_action, state_image, TrainerConfig};
use gridlu_env::{render, step, Action, Image};
use instance_gen::InstanceStream;
use neural_substrate::PolicyParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_semantics::{success, TemplateSet};

/// One episode, fully recorded: `frames[t]` renders the state before
/// `actions[t]`, and the last frame is the final state.
pub struct EpisodeTrace {
    pub instruction: String,
    pub frames: Vec<Image>,
    pub actions: Vec<Action>,
    /// Ground-truth goal status of each visited state, aligned with
    /// `frames`.
    pub goal_status: Vec<bool>,
    pub success: bool,
}

/// Plays one fresh episode and records every frame. Deterministic given
/// `seed`.
pub fn trace_episode(
    policy: &PolicyParams<f32>,
    cfg: &TrainerConfig,
    seed: u64,
    opts: &EvalOptions,
    templates: &TemplateSet,
) -> EpisodeTrace {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let instance_seed: u64 = master.gen();
    let action_seed: u64 = master.gen();
    let mut stream = InstanceStream::new(cfg.task, instance_seed, opts.gen_opts.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
    let episode_len = opts.episode_len.unwrap_or(cfg.episode_len);

    let instance = stream.next_instance();
    let mut state = instance.initial;
    let mut frames = vec![render(&state)];
    let mut actions = Vec::with_capacity(episode_len);
    let mut goal_status = vec![success(&instance.instruction, &state, templates)];
    for _ in 0..episode_len {
        let eval = policy
            .forward(&instance.instruction, &state_image::<f32>(&state))
            .expect("policy trunk supports the task's instructions");
        let action = match opts.selection {
            ActionSelection::Sampled => sample_action(&eval.probs, &mut rng),
            ActionSelection::Greedy => {
                let mut best = 0;
                for i in 1..eval.probs.len() {
                    if eval.probs[i] > eval.probs[best] {
                        best = i;
                    }
                }
                Action::ALL[best]
            }
        };
        state = step(&state, action, &opts.modifier);
        frames.push(render(&state));
        actions.push(action);
        goal_status.push(success(&instance.instruction, &state, templates));
    }

    EpisodeTrace {
        instruction: instance.instruction.to_string(),
        success: *goal_status.last().unwrap(),
        frames,
        actions,
        goal_status,
    }
}
