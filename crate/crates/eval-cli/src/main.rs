//! Command-line surface for the GridLU AGILE stack: dataset generation,
//! training under either reward source, evaluation, sweeps, confusion
//! tracking, episode rendering, and the self-check suite.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use eval_cli::{
    all_pass, collect_probe_pairs, evaluate, load_trained, red_square_experiment, run_sweep,
    run_verify, trace_episode, track_confusion, ActionSelection, EvalOptions, RedSquareSetup,
    SweepSpec, SweepVariable,
};
use instance_gen::{build_dataset, ExpertDataset, GenOptions, InstructionFilter, Task};
use agile_trainer::{run_agile, CheckpointPlan, RewardSource, RunSetup, TrainerConfig};
use neural_substrate::{init_disc, init_policy, DiscParams, PolicyParams, TrunkKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_semantics::TemplateSet;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "gridlu", version, about = "GridLU instruction-following experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Relations,
    Arrangements,
}

impl From<TaskArg> for Task {
    fn from(value: TaskArg) -> Task {
        match value {
            TaskArg::Relations => Task::Relations,
            TaskArg::Arrangements => Task::Arrangements,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    /// Rewards from the programmed checker.
    GroundTruth,
    /// Rewards from the learned reward model, trained jointly.
    Agile,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    All,
    GoTo,
    BringTo,
    RedRect,
}

impl From<FilterArg> for InstructionFilter {
    fn from(value: FilterArg) -> InstructionFilter {
        match value {
            FilterArg::All => InstructionFilter::All,
            FilterArg::GoTo => InstructionFilter::GoToOnly,
            FilterArg::BringTo => InstructionFilter::BringToOnly,
            FilterArg::RedRect => InstructionFilter::RedRectBringTo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariableArg {
    DatasetSize,
    Rho,
    Architecture,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a verified expert dataset file.
    GenDataset {
        #[arg(long, value_enum, default_value = "relations")]
        task: TaskArg,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy; the two reward sources differ only in reward wiring.
    Train {
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        #[arg(long, value_enum, default_value = "ground-truth")]
        reward_source: SourceArg,
        /// Flat key = value config file; defaults per task otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Override the anticipated negative rate.
        #[arg(long)]
        rho: Option<f64>,
        /// Override the policy worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Environment-step budget.
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        /// Expert dataset file; generated fresh when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Size of the generated dataset when no file is given.
        #[arg(long, default_value_t = 10_000)]
        dataset_size: usize,
        /// Restrict training instructions.
        #[arg(long, value_enum, default_value = "all")]
        filter: FilterArg,
        #[arg(long, default_value_t = 50)]
        metrics_every: usize,
        /// Checkpoint every this many metrics points (0 = final only).
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
        /// Output directory for metrics and checkpoints.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on fresh episodes.
    Eval {
        /// Checkpoint file, or a directory to pick the best checkpoint from
        /// by mean modelled reward.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Pick the highest-probability action instead of sampling.
        #[arg(long)]
        greedy: bool,
        #[arg(long, value_enum, default_value = "all")]
        filter: FilterArg,
        /// Evaluate under the immovable-red-rect modifier.
        #[arg(long)]
        immovable_red: bool,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one policy per grid point and report max success over training.
    Sweep {
        #[arg(long, value_enum)]
        variable: VariableArg,
        /// Comma-separated grid values for the chosen variable.
        #[arg(long)]
        grid: String,
        /// Comma-separated seeds; one run per (point, seed).
        #[arg(long, default_value = "1")]
        seeds: String,
        /// Environment-step budget per run.
        #[arg(long, default_value_t = 50_000)]
        budget: usize,
        #[arg(long, default_value_t = 1_000)]
        dataset_size: usize,
        #[arg(long, default_value_t = 100)]
        eval_episodes: usize,
        #[arg(long, default_value_t = 50)]
        metrics_every: usize,
        #[arg(long, value_enum, default_value = "relations")]
        task: TaskArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a checkpoint's reward model against the ground-truth checker.
    Confusion {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Probe pairs per batch.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        batches: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play one episode and dump every frame for offline inspection.
    RenderEpisode {
        /// Checkpoint file; a freshly initialized policy when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "relations")]
        task: TaskArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every self-check; nonzero exit when any fails.
    Verify,
    /// The immovable-red-square drop and fine-tuning recovery experiment.
    RedSquare {
        /// Checkpoint holding the trained policy and reward model.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        /// Fine-tuning environment-step budget.
        #[arg(long, default_value_t = 50_000)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<TrainerConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(TrainerConfig::from_config_string(&text)?)
}

fn base_config(config: Option<&PathBuf>, task: Option<TaskArg>) -> Result<TrainerConfig> {
    match config {
        Some(path) => {
            let cfg = load_config(path)?;
            if let Some(t) = task {
                if cfg.task != Task::from(t) {
                    bail!(
                        "--task {} conflicts with the config's task {}",
                        Task::from(t).name(),
                        cfg.task.name()
                    );
                }
            }
            Ok(cfg)
        }
        None => Ok(TrainerConfig::for_task(
            task.map(Task::from).unwrap_or(Task::Relations),
        )),
    }
}

/// Resolves --checkpoint, announcing the pick when it was a directory.
fn pick(path: &Path) -> Result<PathBuf> {
    let chosen = eval_cli::pick_checkpoint(path)?;
    if chosen != path {
        eprintln!("picked {}", chosen.display());
    }
    Ok(chosen)
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_gen_dataset(task: Task, n: usize, seed: u64, out: &Path) -> Result<()> {
    let templates = TemplateSet::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dataset = build_dataset(task, n, &mut rng, seed, &GenOptions::default(), &templates);
    dataset.write(out)?;
    println!(
        "wrote {} verified {} examples to {}",
        dataset.examples.len(),
        task.name(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    cfg: TrainerConfig,
    source: SourceArg,
    seed: u64,
    steps: usize,
    dataset_path: Option<&PathBuf>,
    dataset_size: usize,
    filter: InstructionFilter,
    metrics_every: usize,
    checkpoint_every: usize,
    out: &Path,
) -> Result<()> {
    let templates = TemplateSet::builtin();
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let gen_opts = GenOptions {
        filter,
        ..GenOptions::default()
    };

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let init_seed: u64 = master.gen();
    let data_seed: u64 = master.gen();
    let run_seed: u64 = master.gen();
    let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed);
    let mut policy: PolicyParams<f32> = init_policy(&cfg.policy_model(), &mut init_rng);

    let (reward_source, mut disc, dataset) = match source {
        SourceArg::GroundTruth => (RewardSource::GroundTruth, None, None),
        SourceArg::Agile => {
            let disc: DiscParams<f32> = init_disc(&cfg.disc_model(), &mut init_rng);
            let dataset = match dataset_path {
                Some(path) => {
                    let d = ExpertDataset::load(path, &templates)?;
                    println!(
                        "loaded {} expert examples from {}",
                        d.examples.len(),
                        path.display()
                    );
                    d
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
                    build_dataset(cfg.task, dataset_size, &mut rng, data_seed, &gen_opts, &templates)
                }
            };
            (
                RewardSource::RewardModel { frozen: false },
                Some(disc),
                Some(dataset),
            )
        }
    };

    let setup = RunSetup {
        cfg: &cfg,
        source: reward_source,
        dataset: dataset.as_ref(),
        modifier: gridlu_env::EnvModifier::NONE,
        gen_opts,
        templates: &templates,
        seed: run_seed,
        max_env_steps: steps,
        metrics_every,
        checkpoint: Some(CheckpointPlan {
            dir: out.to_path_buf(),
            every_points: checkpoint_every,
        }),
    };
    let summary = run_agile(&mut policy, disc.as_mut(), &setup, |point, _| {
        println!("{}", point.line);
        false
    })?;
    fs::write(out.join("metrics.txt"), &summary.metrics)?;
    println!(
        "done: {} env steps, {} episodes, success rate {:.4}; metrics and checkpoints in {}",
        summary.env_steps,
        summary.episodes,
        summary.successes as f64 / summary.episodes.max(1) as f64,
        out.display()
    );
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    episodes: usize,
    seed: u64,
    greedy: bool,
    filter: InstructionFilter,
    immovable_red: bool,
    out: Option<&PathBuf>,
) -> Result<()> {
    let templates = TemplateSet::builtin();
    let path = pick(checkpoint)?;
    let loaded = load_trained(&path)?;
    let opts = EvalOptions {
        selection: if greedy {
            ActionSelection::Greedy
        } else {
            ActionSelection::Sampled
        },
        modifier: if immovable_red {
            gridlu_env::EnvModifier::immovable_red_rects()
        } else {
            gridlu_env::EnvModifier::NONE
        },
        gen_opts: GenOptions {
            filter,
            ..GenOptions::default()
        },
        episode_len: None,
    };
    let report = evaluate(&loaded.policy, &loaded.cfg, episodes, seed, &opts, &templates);
    write_or_print(out, &report.to_file_string())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    variable: VariableArg,
    grid: &str,
    seeds: &str,
    budget: usize,
    dataset_size: usize,
    eval_episodes: usize,
    metrics_every: usize,
    base: TrainerConfig,
    out: Option<&PathBuf>,
) -> Result<()> {
    let templates = TemplateSet::builtin();
    fn parse_list(s: &str) -> Vec<&str> {
        s.split(',').map(str::trim).collect()
    }
    let variable = match variable {
        VariableArg::DatasetSize => SweepVariable::DatasetSize(
            parse_list(grid)
                .iter()
                .map(|v| v.parse().map_err(|_| anyhow!("bad dataset size {v:?}")))
                .collect::<Result<_>>()?,
        ),
        VariableArg::Rho => SweepVariable::Rho(
            parse_list(grid)
                .iter()
                .map(|v| v.parse().map_err(|_| anyhow!("bad rho {v:?}")))
                .collect::<Result<_>>()?,
        ),
        VariableArg::Architecture => SweepVariable::Architecture(
            parse_list(grid)
                .iter()
                .map(|v| {
                    TrunkKind::from_name(v).ok_or_else(|| anyhow!("unknown architecture {v:?}"))
                })
                .collect::<Result<_>>()?,
        ),
    };
    let seeds: Vec<u64> = parse_list(seeds)
        .iter()
        .map(|v| v.parse().map_err(|_| anyhow!("bad seed {v:?}")))
        .collect::<Result<_>>()?;
    let spec = SweepSpec {
        base,
        variable,
        seeds,
        budget_env_steps: budget,
        default_dataset_size: dataset_size,
        eval_episodes,
        metrics_every,
        gen_opts: GenOptions::default(),
    };
    let report = run_sweep(&spec, &templates);
    write_or_print(out, &report.table())
}

fn cmd_confusion(
    checkpoint: &Path,
    n: usize,
    batches: usize,
    seed: u64,
    out: Option<&PathBuf>,
) -> Result<()> {
    let templates = TemplateSet::builtin();
    let path = pick(checkpoint)?;
    let loaded = load_trained(&path)?;
    let disc = loaded
        .disc
        .as_ref()
        .ok_or_else(|| anyhow!("checkpoint holds no reward model"))?;
    let probes = (0..batches).map(|i| {
        let pairs = collect_probe_pairs(
            &loaded.policy,
            &loaded.cfg,
            &GenOptions::default(),
            &templates,
            n,
            seed.wrapping_add(i as u64),
        );
        (i, pairs)
    });
    let records = track_confusion(disc, probes, &templates);
    let mut text = String::from("batch\ttp\tfp\ttn\tfn\taccuracy\tfp_rate\tfn_rate\n");
    for r in &records {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
            r.step,
            r.tp,
            r.fp,
            r.tn,
            r.fn_,
            r.accuracy(),
            r.fp_rate(),
            r.fn_rate()
        ));
    }
    write_or_print(out, &text)
}

fn cmd_render_episode(
    checkpoint: Option<&PathBuf>,
    task: Task,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let templates = TemplateSet::builtin();
    let (policy, cfg) = match checkpoint {
        Some(path) => {
            let loaded = load_trained(&pick(path)?)?;
            (loaded.policy, loaded.cfg)
        }
        None => {
            let cfg = TrainerConfig::for_task(task);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (init_policy(&cfg.policy_model(), &mut rng), cfg)
        }
    };
    let trace = trace_episode(&policy, &cfg, seed, &EvalOptions::default(), &templates);
    fs::create_dir_all(out)?;
    for (t, frame) in trace.frames.iter().enumerate() {
        fs::write(out.join(format!("step-{t:03}.ppm")), frame.to_ppm())?;
    }
    let mut transcript = format!("instruction: {}\n", trace.instruction);
    for (t, action) in trace.actions.iter().enumerate() {
        transcript.push_str(&format!(
            "step {t:3}: {:?} -> goal = {}\n",
            action,
            trace.goal_status[t + 1]
        ));
    }
    transcript.push_str(&format!("success: {}\n", trace.success));
    fs::write(out.join("transcript.txt"), &transcript)?;
    println!(
        "instruction: {}\nsuccess: {}\nwrote {} frames to {}",
        trace.instruction,
        trace.success,
        trace.frames.len(),
        out.display()
    );
    Ok(())
}

fn cmd_verify() -> Result<()> {
    let templates = TemplateSet::builtin();
    let results = run_verify(&templates);
    for result in &results {
        println!("{}", result.line());
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} checks passed", results.len());
    if !all_pass(&results) {
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_red_square(
    checkpoint: &Path,
    episodes: usize,
    steps: usize,
    seed: u64,
    out: Option<&PathBuf>,
) -> Result<()> {
    let templates = TemplateSet::builtin();
    let path = pick(checkpoint)?;
    let loaded = load_trained(&path)?;
    let disc = loaded
        .disc
        .clone()
        .ok_or_else(|| anyhow!("checkpoint holds no reward model"))?;
    let mut policy = loaded.policy;
    let setup = RedSquareSetup {
        cfg: loaded.cfg,
        eval_episodes: episodes,
        fine_tune_env_steps: steps,
        metrics_every: 50,
        seed,
    };
    let report = red_square_experiment(&mut policy, &disc, &setup, &templates)?;
    write_or_print(out, &report.summary())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenDataset { task, n, seed, out } => {
            cmd_gen_dataset(task.into(), n, seed, &out)
        }
        Command::Train {
            task,
            reward_source,
            config,
            seed,
            rho,
            workers,
            steps,
            dataset,
            dataset_size,
            filter,
            metrics_every,
            checkpoint_every,
            out,
        } => {
            let mut cfg = base_config(config.as_ref(), task)?;
            if let Some(rho) = rho {
                cfg.rho = rho;
            }
            if let Some(workers) = workers {
                cfg.policy_workers = workers;
            }
            cmd_train(
                cfg,
                reward_source,
                seed,
                steps,
                dataset.as_ref(),
                dataset_size,
                filter.into(),
                metrics_every,
                checkpoint_every,
                &out,
            )
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
            greedy,
            filter,
            immovable_red,
            out,
        } => cmd_eval(
            &checkpoint,
            episodes,
            seed,
            greedy,
            filter.into(),
            immovable_red,
            out.as_ref(),
        ),
        Command::Sweep {
            variable,
            grid,
            seeds,
            budget,
            dataset_size,
            eval_episodes,
            metrics_every,
            task,
            config,
            out,
        } => {
            let base = base_config(config.as_ref(), Some(task))?;
            cmd_sweep(
                variable,
                &grid,
                &seeds,
                budget,
                dataset_size,
                eval_episodes,
                metrics_every,
                base,
                out.as_ref(),
            )
        }
        Command::Confusion {
            checkpoint,
            n,
            batches,
            seed,
            out,
        } => cmd_confusion(&checkpoint, n, batches, seed, out.as_ref()),
        Command::RenderEpisode {
            checkpoint,
            task,
            seed,
            out,
        } => cmd_render_episode(checkpoint.as_ref(), task.into(), seed, &out),
        Command::Verify => cmd_verify(),
        Command::RedSquare {
            checkpoint,
            episodes,
            steps,
            seed,
            out,
        } => cmd_red_square(&checkpoint, episodes, steps, seed, out.as_ref()),
    }
}
