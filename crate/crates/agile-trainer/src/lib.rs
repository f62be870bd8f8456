//! Adversarially learned reward training for GridLU: an instruction
//! conditional policy is trained by advantage actor-critic while a
//! discriminator learns to tell expert goal states from the states the
//! agent actually visits. The thresholded discriminator score is the
//! policy's only reward in that regime; a ground-truth reward wiring shares
//! every other code path.

pub mod buffer;
pub mod config;
pub mod disc;
pub mod optim;
pub mod policy;
pub mod rollout;
pub mod run;
pub mod verify;

pub use buffer::{Pair, ReplayBuffer, RpBuffer, RP_BUFFER_CAPACITY};
pub use config::{ConfigError, OptimConfig, TrainerConfig};
pub use disc::{
    bce_from_logit, confusion_counts, discriminator_step, filter_negatives, negative_draw_count,
    retained_count, Confusion, DiscDiagnostics,
};
pub use optim::RmsProp;
pub use policy::{
    accumulate_policy_gradient, policy_update, reward_prediction_update, PolicyObjective,
};
pub use rollout::{
    collect_rollout, compute_returns, modelled_reward, sample_action, state_image, EpisodeCursor,
    RewardSource, Rollout,
};
pub use run::{
    disc_params_identical, fine_tune, load_checkpoint, run_agile, save_checkpoint, CheckpointPlan,
    MetricsPoint, RunError, RunSetup, RunSummary,
};
pub use verify::verify_policy_objective;
