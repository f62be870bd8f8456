//! Experiment protocols over the GridLU training stack: success-rate
//! evaluation against the ground-truth checker, discriminator confusion
//! tracking, data-efficiency and robustness sweeps, the immovable-red-square
//! fine-tuning experiment, and the self-check suite behind the `verify`
//! command.

pub mod checkpoint;
pub mod confusion;
pub mod report;
pub mod redsquare;
pub mod sweep;
pub mod trace;
pub mod verify;

pub use checkpoint::{load_trained, pick_checkpoint, LoadError, LoadedCheckpoint};
pub use confusion::{collect_probe_pairs, track_confusion, ConfusionRecord};
pub use redsquare::{red_square_experiment, RedSquareReport, RedSquareSetup};
pub use report::{
    config_digest, evaluate, ActionSelection, ArrangementsSplit, EvalOptions, EvalReport,
    InstructionStat, SubCount,
};
pub use sweep::{run_sweep, SweepReport, SweepRow, SweepSpec, SweepVariable};
pub use trace::{trace_episode, EpisodeTrace};
pub use verify::{
    all_pass, max_weight_column_sumsq, run_verify, CheckResult, GOAL_STATE_TABLE, GOAL_STATE_TOTAL,
};
