//! The immovable-red-square experiment: measure how a trained policy
//! degrades when red rect blocks become immovable, then fine-tune it
//! against the frozen reward model inside the modified environment and
//! measure the recovery.

use crate::report::{evaluate, EvalOptions, EvalReport};
use agile_trainer::{fine_tune, RewardSource, RunError, RunSetup, TrainerConfig};
use gridlu_env::EnvModifier;
use instance_gen::{GenOptions, InstructionFilter};
use neural_substrate::{DiscParams, PolicyParams};
use reward_semantics::TemplateSet;
use std::fmt::Write as _;

/// Experiment knobs.
#[derive(Debug, Clone)]
pub struct RedSquareSetup {
    pub cfg: TrainerConfig,
    pub eval_episodes: usize,
    pub fine_tune_env_steps: usize,
    pub metrics_every: usize,
    pub seed: u64,
}

/// Before/after evaluations around the fine-tuning run. All four
/// evaluations use the red-rect instruction filter; "modified" ones run
/// under the immovable-red-rect environment.
#[derive(Debug, Clone)]
pub struct RedSquareReport {
    pub unmodified_before: EvalReport,
    pub modified_before: EvalReport,
    pub modified_after: EvalReport,
    pub unmodified_after: EvalReport,
    pub fine_tune_env_steps: usize,
}

impl RedSquareReport {
    /// Success-rate change caused by the modifier before fine-tuning
    /// (negative when the modifier hurts).
    pub fn drop(&self) -> f64 {
        self.modified_before.success_rate - self.unmodified_before.success_rate
    }

    /// Success-rate change on the modified environment across fine-tuning
    /// (positive when fine-tuning helps).
    pub fn recovery(&self) -> f64 {
        self.modified_after.success_rate - self.modified_before.success_rate
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "unmodified before = {:.4}",
            self.unmodified_before.success_rate
        );
        let _ = writeln!(
            out,
            "modified   before = {:.4}",
            self.modified_before.success_rate
        );
        let _ = writeln!(
            out,
            "modified   after  = {:.4}",
            self.modified_after.success_rate
        );
        let _ = writeln!(
            out,
            "unmodified after  = {:.4}",
            self.unmodified_after.success_rate
        );
        let _ = writeln!(out, "drop = {:+.4}  recovery = {:+.4}", self.drop(), self.recovery());
        out
    }
}

fn red_rect_gen_opts() -> GenOptions {
    GenOptions {
        filter: InstructionFilter::RedRectBringTo,
        ..GenOptions::default()
    }
}

/// Evaluates the policy on red-rect instructions in the unmodified and
/// modified environments, fine-tunes it against the frozen reward model
/// inside the modified environment, and evaluates both again.
pub fn red_square_experiment(
    policy: &mut PolicyParams<f32>,
    disc: &DiscParams<f32>,
    setup: &RedSquareSetup,
    templates: &TemplateSet,
) -> Result<RedSquareReport, RunError> {
    let gen_opts = red_rect_gen_opts();
    let eval = |policy: &PolicyParams<f32>, modifier: EnvModifier| {
        let opts = EvalOptions {
            modifier,
            gen_opts: gen_opts.clone(),
            ..EvalOptions::default()
        };
        evaluate(
            policy,
            &setup.cfg,
            setup.eval_episodes,
            setup.seed ^ 0xe7a1,
            &opts,
            templates,
        )
    };

    let unmodified_before = eval(policy, EnvModifier::NONE);
    let modified_before = eval(policy, EnvModifier::immovable_red_rects());

    let run_setup = RunSetup {
        cfg: &setup.cfg,
        source: RewardSource::RewardModel { frozen: true },
        dataset: None,
        modifier: EnvModifier::immovable_red_rects(),
        gen_opts: gen_opts.clone(),
        templates,
        seed: setup.seed,
        max_env_steps: setup.fine_tune_env_steps,
        metrics_every: setup.metrics_every,
        checkpoint: None,
    };
    fine_tune(policy, disc, &run_setup, |_, _| false)?;

    let modified_after = eval(policy, EnvModifier::immovable_red_rects());
    let unmodified_after = eval(policy, EnvModifier::NONE);

    Ok(RedSquareReport {
        unmodified_before,
        modified_before,
        modified_after,
        unmodified_after,
        fine_tune_env_steps: setup.fine_tune_env_steps,
    })
}
