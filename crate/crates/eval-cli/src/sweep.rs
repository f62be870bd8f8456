//! Sweep runner: trains one AGILE policy per grid point and seed, tracking
//! the maximum success rate seen over training.

use crate::report::{evaluate, EvalOptions};
use agile_trainer::{run_agile, RewardSource, RunSetup, TrainerConfig};
use instance_gen::{build_dataset, GenOptions};
use neural_substrate::{init_disc, init_policy, DiscParams, PolicyParams, TrunkKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_semantics::TemplateSet;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// The swept variable and its grid.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepVariable {
    DatasetSize(Vec<usize>),
    Rho(Vec<f64>),
    Architecture(Vec<TrunkKind>),
}

impl SweepVariable {
    pub fn grid_len(&self) -> usize {
        match self {
            SweepVariable::DatasetSize(g) => g.len(),
            SweepVariable::Rho(g) => g.len(),
            SweepVariable::Architecture(g) => g.len(),
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            SweepVariable::DatasetSize(g) => {
                g.iter().map(|n| format!("dataset={n}")).collect()
            }
            SweepVariable::Rho(g) => g.iter().map(|r| format!("rho={r}")).collect(),
            SweepVariable::Architecture(g) => {
                g.iter().map(|t| format!("arch={}", t.name())).collect()
            }
        }
    }
}

/// A full sweep request.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: TrainerConfig,
    pub variable: SweepVariable,
    /// Seeds per grid point; the sweep emits one row per (point, seed).
    pub seeds: Vec<u64>,
    /// Environment-step budget per training run.
    pub budget_env_steps: usize,
    /// Dataset size for points that do not sweep it.
    pub default_dataset_size: usize,
    /// Fresh episodes per success probe at each metrics point.
    pub eval_episodes: usize,
    /// Training cycles between metrics points (and hence probes).
    pub metrics_every: usize,
    pub gen_opts: GenOptions,
}

impl SweepSpec {
    fn validate(&self) {
        assert!(self.variable.grid_len() > 0, "sweep grid must be non-empty");
        assert!(!self.seeds.is_empty(), "sweep needs at least one seed");
        assert!(self.eval_episodes > 0, "sweep probes need episodes");
    }
}

/// One (grid point, seed) outcome.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: String,
    pub seed: u64,
    /// Largest probe success rate seen at any metrics point (the final
    /// policy included). NaN when the run failed.
    pub max_success: f64,
    /// Probe success rate of the final policy. NaN when the run failed.
    pub final_success: f64,
    pub env_steps: usize,
    /// "ok", or the failure description.
    pub note: String,
}

/// All rows of a sweep, in grid-major order.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Renders the consolidated table.
    pub fn table(&self) -> String {
        let mut out = String::from("point\tseed\tmax_success\tfinal_success\tenv_steps\tnote\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                row.point, row.seed, row.max_success, row.final_success, row.env_steps, row.note
            );
        }
        out
    }
}

fn point_config(base: &TrainerConfig, variable: &SweepVariable, index: usize) -> TrainerConfig {
    let mut cfg = base.clone();
    match variable {
        SweepVariable::DatasetSize(_) => {}
        SweepVariable::Rho(g) => cfg.rho = g[index],
        SweepVariable::Architecture(g) => {
            cfg.policy_trunk = g[index];
            cfg.disc_trunk = g[index];
        }
    }
    cfg
}

fn point_dataset_size(spec: &SweepSpec, index: usize) -> usize {
    match &spec.variable {
        SweepVariable::DatasetSize(g) => g[index],
        _ => spec.default_dataset_size,
    }
}

fn run_point(
    spec: &SweepSpec,
    cfg: &TrainerConfig,
    dataset_size: usize,
    seed: u64,
    templates: &TemplateSet,
) -> Result<(f64, f64, usize), String> {
    cfg.validate().map_err(|e| e.to_string())?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let init_seed: u64 = master.gen();
    let dataset_seed: u64 = master.gen();
    let run_seed: u64 = master.gen();
    let eval_seed: u64 = master.gen();

    let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed);
    let mut policy: PolicyParams<f32> = init_policy(&cfg.policy_model(), &mut init_rng);
    let mut disc: DiscParams<f32> = init_disc(&cfg.disc_model(), &mut init_rng);
    let mut dataset_rng = ChaCha8Rng::seed_from_u64(dataset_seed);
    let dataset = build_dataset(
        cfg.task,
        dataset_size,
        &mut dataset_rng,
        dataset_seed,
        &spec.gen_opts,
        templates,
    );

    let setup = RunSetup {
        cfg,
        source: RewardSource::RewardModel { frozen: false },
        dataset: Some(&dataset),
        modifier: gridlu_env::EnvModifier::NONE,
        gen_opts: spec.gen_opts.clone(),
        templates,
        seed: run_seed,
        max_env_steps: spec.budget_env_steps,
        metrics_every: spec.metrics_every,
        checkpoint: None,
    };
    let eval_opts = EvalOptions {
        gen_opts: spec.gen_opts.clone(),
        ..EvalOptions::default()
    };

    let mut max_success = f64::NEG_INFINITY;
    let mut final_success = f64::NAN;
    let summary = run_agile(&mut policy, Some(&mut disc), &setup, |_, snapshot| {
        let report = evaluate(snapshot, cfg, spec.eval_episodes, eval_seed, &eval_opts, templates);
        max_success = max_success.max(report.success_rate);
        final_success = report.success_rate;
        false
    })
    .map_err(|e| e.to_string())?;
    Ok((max_success, final_success, summary.env_steps))
}

/// Trains one policy per (grid point, seed) and reports the maximum probe
/// success rate over training for each. Failures become rows with a
/// descriptive note; the sweep continues.
pub fn run_sweep(spec: &SweepSpec, templates: &TemplateSet) -> SweepReport {
    spec.validate();
    let labels = spec.variable.labels();
    let mut rows = Vec::with_capacity(labels.len() * spec.seeds.len());
    for (i, label) in labels.iter().enumerate() {
        let cfg = point_config(&spec.base, &spec.variable, i);
        let dataset_size = point_dataset_size(spec, i);
        for &seed in &spec.seeds {
            let outcome = catch_unwind(AssertUnwindSafe(|| {
                run_point(spec, &cfg, dataset_size, seed, templates)
            }));
            let row = match outcome {
                Ok(Ok((max_success, final_success, env_steps))) => SweepRow {
                    point: label.clone(),
                    seed,
                    max_success,
                    final_success,
                    env_steps,
                    note: "ok".into(),
                },
                Ok(Err(message)) => SweepRow {
                    point: label.clone(),
                    seed,
                    max_success: f64::NAN,
                    final_success: f64::NAN,
                    env_steps: 0,
                    note: format!("failed: {message}"),
                },
                Err(panic) => {
                    let message = panic
                        .downcast_ref::<String>()
                        .map(String::as_str)
                        .or_else(|| panic.downcast_ref::<&str>().copied())
                        .unwrap_or("panic");
                    SweepRow {
                        point: label.clone(),
                        seed,
                        max_success: f64::NAN,
                        final_success: f64::NAN,
                        env_steps: 0,
                        note: format!("failed: {message}"),
                    }
                }
            };
            rows.push(row);
        }
    }
    SweepReport { rows }
}
