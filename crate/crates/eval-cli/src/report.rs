//! Success-rate evaluation: fixed-length episodes on fresh instances,
//! final states judged by the ground-truth checker.

use agile_trainer::{sample_action, state_image, TrainerConfig};
use gridlu_env::{step, Action, EnvModifier, WorldState};
use instance_gen::{GenOptions, InstanceStream, Task};
use neural_substrate::{PolicyParams, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_semantics::{success, TemplateSet};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// How the evaluator picks actions from the policy's distribution. The
/// default samples, matching training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionSelection {
    #[default]
    Sampled,
    /// Highest-probability action, lowest index on ties.
    Greedy,
}

/// Evaluation knobs beyond the trainer config.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub selection: ActionSelection,
    pub modifier: EnvModifier,
    pub gen_opts: GenOptions,
    /// Episode length override; defaults to the config's.
    pub episode_len: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            selection: ActionSelection::Sampled,
            modifier: EnvModifier::NONE,
            gen_opts: GenOptions::default(),
            episode_len: None,
        }
    }
}

/// Episode tally for one instruction text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionStat {
    pub instruction: String,
    pub episodes: usize,
    pub successes: usize,
}

/// Episode tally for one side of the Arrangements block-count split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SubCount {
    pub episodes: usize,
    pub successes: usize,
}

impl SubCount {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            f64::NAN
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

/// Arrangements results split by episode block count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ArrangementsSplit {
    pub four_block: SubCount,
    pub eight_block: SubCount,
}

/// The outcome of an evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub episodes: usize,
    pub successes: usize,
    /// successes / episodes.
    pub success_rate: f64,
    /// Per-instruction tallies, ordered by instruction text.
    pub per_instruction: Vec<InstructionStat>,
    pub seed: u64,
    /// Hex digest of the trainer config the policy was evaluated under.
    pub config_digest: String,
    /// Present for Arrangements only.
    pub split: Option<ArrangementsSplit>,
}

impl EvalReport {
    /// Renders the report as a line-oriented text file.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task = {}", self.task.name());
        let _ = writeln!(out, "episodes = {}", self.episodes);
        let _ = writeln!(out, "successes = {}", self.successes);
        let _ = writeln!(out, "success_rate = {:.6}", self.success_rate);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "config_digest = {}", self.config_digest);
        if let Some(split) = &self.split {
            let _ = writeln!(
                out,
                "four_block = {}/{} ({:.6})",
                split.four_block.successes,
                split.four_block.episodes,
                split.four_block.rate()
            );
            let _ = writeln!(
                out,
                "eight_block = {}/{} ({:.6})",
                split.eight_block.successes,
                split.eight_block.episodes,
                split.eight_block.rate()
            );
        }
        for stat in &self.per_instruction {
            let _ = writeln!(
                out,
                "instr\t{}\t{}\t{}",
                stat.successes, stat.episodes, stat.instruction
            );
        }
        out
    }
}

/// Short hex digest identifying a trainer config.
pub fn config_digest(cfg: &TrainerConfig) -> String {
    let hash = Sha256::digest(cfg.to_config_string().as_bytes());
    let mut s = String::new();
    for byte in &hash[..8] {
        let _ = write!(s, "{byte:02x}");
    }
    s
}

fn greedy_action<F: Scalar>(probs: &[F]) -> Action {
    let mut best = 0;
    for i in 1..probs.len() {
        if probs[i].to_f64() > probs[best].to_f64() {
            best = i;
        }
    }
    Action::ALL[best]
}

/// Runs one fixed-length episode and returns its final state.
fn play_episode(
    policy: &PolicyParams<f32>,
    instruction: &instruction_lang::Instruction,
    start: WorldState,
    episode_len: usize,
    opts: &EvalOptions,
    rng: &mut ChaCha8Rng,
) -> WorldState {
    let mut state = start;
    for _ in 0..episode_len {
        let eval = policy
            .forward(instruction, &state_image::<f32>(&state))
            .expect("policy trunk supports the task's instructions");
        let action = match opts.selection {
            ActionSelection::Sampled => sample_action(&eval.probs, rng),
            ActionSelection::Greedy => greedy_action(&eval.probs),
        };
        state = step(&state, action, &opts.modifier);
    }
    state
}

/// Evaluates the policy over `episodes` fresh instances and judges the
/// final state of each with the ground-truth checker. Deterministic given
/// `seed`; instances and action sampling use seeds derived from it in fixed
/// order.
pub fn evaluate(
    policy: &PolicyParams<f32>,
    cfg: &TrainerConfig,
    episodes: usize,
    seed: u64,
    opts: &EvalOptions,
    templates: &TemplateSet,
) -> EvalReport {
    assert!(episodes > 0, "evaluation needs at least one episode");
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let instance_seed: u64 = master.gen();
    let action_seed: u64 = master.gen();
    let mut stream = InstanceStream::new(cfg.task, instance_seed, opts.gen_opts.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
    let episode_len = opts.episode_len.unwrap_or(cfg.episode_len);

    let mut successes = 0;
    let mut by_instruction: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut split = ArrangementsSplit::default();
    for _ in 0..episodes {
        let instance = stream.next_instance();
        let blocks = instance.initial.blocks().count();
        let final_state = play_episode(
            policy,
            &instance.instruction,
            instance.initial,
            episode_len,
            opts,
            &mut rng,
        );
        let ok = success(&instance.instruction, &final_state, templates);
        let entry = by_instruction
            .entry(instance.instruction.to_string())
            .or_insert((0, 0));
        entry.0 += 1;
        if ok {
            entry.1 += 1;
            successes += 1;
        }
        if cfg.task == Task::Arrangements {
            let side = if blocks <= 4 {
                &mut split.four_block
            } else {
                &mut split.eight_block
            };
            side.episodes += 1;
            if ok {
                side.successes += 1;
            }
        }
    }

    EvalReport {
        task: cfg.task,
        episodes,
        successes,
        success_rate: successes as f64 / episodes as f64,
        per_instruction: by_instruction
            .into_iter()
            .map(|(instruction, (eps, ok))| InstructionStat {
                instruction,
                episodes: eps,
                successes: ok,
            })
            .collect(),
        seed,
        config_digest: config_digest(cfg),
        split: (cfg.task == Task::Arrangements).then_some(split),
    }
}
