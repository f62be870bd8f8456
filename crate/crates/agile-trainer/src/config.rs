//! Training hyperparameters and the flat `key = value` config format.

use instance_gen::Task;
use neural_substrate::{ModelConfig, TrunkKind};
use thiserror::Error;

/// RMSProp settings for one optimizer instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub lr: f64,
    pub decay: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip applied before the update.
    pub clip: f64,
}

/// All training hyperparameters. `Default` is the full-scale Relations
/// configuration; `for_task` adjusts the episode geometry for Arrangements.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub task: Task,
    pub policy_optim: OptimConfig,
    pub disc_optim: OptimConfig,
    /// Discriminator batch size BS; half positives, half retained negatives.
    pub disc_batch: usize,
    /// Rollout length R between policy updates.
    pub rollout_len: usize,
    /// Episode length T.
    pub episode_len: usize,
    pub gamma: f64,
    /// Reward granted when the reward source fires.
    pub reward_scale: f64,
    /// Weight on the baseline (value) mean squared error.
    pub baseline_cost: f64,
    /// Weight on the auxiliary reward-prediction cross entropy.
    pub rp_cost: f64,
    /// Reward-prediction batch size.
    pub rp_batch: usize,
    /// Entropy regularization weight.
    pub entropy_weight: f64,
    /// Fraction of sampled negatives retained by false-negative filtering.
    pub rho: f64,
    pub buffer_capacity: usize,
    pub policy_workers: usize,
    /// Return mixing parameter; only pure n-step returns are implemented.
    pub lambda: f64,
    /// When true every worker appends rollout states to the replay buffer;
    /// by default only the discriminator worker feeds it.
    pub all_workers_feed_buffer: bool,
    pub policy_trunk: TrunkKind,
    pub disc_trunk: TrunkKind,
    /// Stem channel widths and head width shared by both networks.
    pub stem_c1: usize,
    pub lstm_c2: usize,
    pub trunk_c: usize,
    pub hidden: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        let base = ModelConfig::default();
        TrainerConfig {
            task: Task::Relations,
            policy_optim: OptimConfig {
                lr: 3e-4,
                decay: 0.99,
                epsilon: 0.1,
                clip: 40.0,
            },
            disc_optim: OptimConfig {
                lr: 5e-4,
                decay: 0.9,
                epsilon: 1e-10,
                clip: 25.0,
            },
            disc_batch: 256,
            rollout_len: 15,
            episode_len: 30,
            gamma: 0.99,
            reward_scale: 0.1,
            baseline_cost: 1.0,
            rp_cost: 1.0,
            rp_batch: 4,
            entropy_weight: 0.01,
            rho: 0.25,
            buffer_capacity: 100_000,
            policy_workers: 15,
            lambda: 0.0,
            all_workers_feed_buffer: false,
            policy_trunk: TrunkKind::Nmn,
            disc_trunk: TrunkKind::Nmn,
            stem_c1: base.stem_c1,
            lstm_c2: base.lstm_c2,
            trunk_c: base.trunk_c,
            hidden: base.hidden,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`, got {1:?}")]
    BadLine(usize, String),
    #[error("line {0}: unknown key {1:?}")]
    UnknownKey(usize, String),
    #[error("line {0}: bad value for {1}: {2:?}")]
    BadValue(usize, String, String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl TrainerConfig {
    /// Full-scale defaults for a task; Arrangements lengthens episodes.
    pub fn for_task(task: Task) -> TrainerConfig {
        let mut cfg = TrainerConfig::default();
        cfg.task = task;
        if task == Task::Arrangements {
            cfg.episode_len = 45;
            cfg.rollout_len = 30;
            cfg.policy_trunk = TrunkKind::FilmLstm;
            cfg.disc_trunk = TrunkKind::FilmLstm;
        }
        cfg
    }

    /// Policy network geometry implied by this config.
    pub fn policy_model(&self) -> ModelConfig {
        ModelConfig {
            trunk: self.policy_trunk,
            stem_c1: self.stem_c1,
            lstm_c2: self.lstm_c2,
            trunk_c: self.trunk_c,
            hidden: self.hidden,
            ..ModelConfig::default()
        }
    }

    /// Discriminator network geometry implied by this config.
    pub fn disc_model(&self) -> ModelConfig {
        ModelConfig {
            trunk: self.disc_trunk,
            ..self.policy_model()
        }
    }

    /// Checks the invariants the trainer relies on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return inv(format!("rho must satisfy 0 < rho <= 1, got {}", self.rho));
        }
        if self.disc_batch == 0 || self.disc_batch % 2 != 0 {
            return inv(format!("disc_batch must be even and positive, got {}", self.disc_batch));
        }
        if self.rollout_len == 0 || self.episode_len < self.rollout_len {
            return inv(format!(
                "need 0 < rollout_len <= episode_len, got {} and {}",
                self.rollout_len, self.episode_len
            ));
        }
        if self.lambda != 0.0 {
            return inv(format!("only lambda = 0 (n-step returns) is implemented, got {}", self.lambda));
        }
        if self.rp_batch == 0 || self.rp_batch % 2 != 0 {
            return inv(format!("rp_batch must be even and positive, got {}", self.rp_batch));
        }
        if self.policy_workers == 0 {
            return inv("policy_workers must be positive".to_string());
        }
        if self.buffer_capacity == 0 {
            return inv("buffer_capacity must be positive".to_string());
        }
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return inv(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.task == Task::Arrangements && self.policy_trunk == TrunkKind::Nmn {
            return inv("the nmn trunk cannot condition on arrangement instructions".to_string());
        }
        if self.task == Task::Arrangements && self.disc_trunk == TrunkKind::Nmn {
            return inv("the nmn discriminator cannot score arrangement instructions".to_string());
        }
        Ok(())
    }

    /// Serializes to the flat `key = value` file format.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("task", self.task.name().to_string());
        kv("policy_lr", self.policy_optim.lr.to_string());
        kv("policy_decay", self.policy_optim.decay.to_string());
        kv("policy_epsilon", self.policy_optim.epsilon.to_string());
        kv("policy_clip", self.policy_optim.clip.to_string());
        kv("disc_lr", self.disc_optim.lr.to_string());
        kv("disc_decay", self.disc_optim.decay.to_string());
        kv("disc_epsilon", self.disc_optim.epsilon.to_string());
        kv("disc_clip", self.disc_optim.clip.to_string());
        kv("disc_batch", self.disc_batch.to_string());
        kv("rollout_len", self.rollout_len.to_string());
        kv("episode_len", self.episode_len.to_string());
        kv("gamma", self.gamma.to_string());
        kv("reward_scale", self.reward_scale.to_string());
        kv("baseline_cost", self.baseline_cost.to_string());
        kv("rp_cost", self.rp_cost.to_string());
        kv("rp_batch", self.rp_batch.to_string());
        kv("entropy_weight", self.entropy_weight.to_string());
        kv("rho", self.rho.to_string());
        kv("buffer_capacity", self.buffer_capacity.to_string());
        kv("policy_workers", self.policy_workers.to_string());
        kv("lambda", self.lambda.to_string());
        kv("all_workers_feed_buffer", self.all_workers_feed_buffer.to_string());
        kv("policy_trunk", self.policy_trunk.name().to_string());
        kv("disc_trunk", self.disc_trunk.name().to_string());
        kv("stem_c1", self.stem_c1.to_string());
        kv("lstm_c2", self.lstm_c2.to_string());
        kv("trunk_c", self.trunk_c.to_string());
        kv("hidden", self.hidden.to_string());
        s
    }

    /// Parses the flat format produced by `to_config_string`. Keys may appear
    /// in any order and omitted keys keep the `for_task` default; `#` starts
    /// a comment. Unknown keys are rejected. The result is validated.
    pub fn from_config_string(text: &str) -> Result<TrainerConfig, ConfigError> {
        Self::parse(text, true)
    }

    /// Like `from_config_string` but skips unknown keys, for recovering the
    /// config embedded in checkpoint metadata alongside run bookkeeping.
    pub fn from_config_lenient(text: &str) -> Result<TrainerConfig, ConfigError> {
        Self::parse(text, false)
    }

    fn parse(text: &str, strict: bool) -> Result<TrainerConfig, ConfigError> {
        // Two passes so a `task` key anywhere in the file picks the defaults.
        let mut task = Task::Relations;
        for (lineno, raw) in text.lines().enumerate() {
            if let Some((k, v)) = split_kv(raw) {
                if k == "task" {
                    task = Task::from_name(v).ok_or_else(|| {
                        ConfigError::BadValue(lineno + 1, "task".into(), v.into())
                    })?;
                }
            }
        }
        let mut cfg = TrainerConfig::for_task(task);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_kv(raw)
                .ok_or_else(|| ConfigError::BadLine(lineno + 1, raw.to_string()))?;
            let n = lineno + 1;
            let bad = |k: &str, v: &str| ConfigError::BadValue(n, k.to_string(), v.to_string());
            macro_rules! num {
                ($field:expr, $ty:ty) => {
                    $field = value.parse::<$ty>().map_err(|_| bad(key, value))?
                };
            }
            match key {
                "task" => {}
                "policy_lr" => num!(cfg.policy_optim.lr, f64),
                "policy_decay" => num!(cfg.policy_optim.decay, f64),
                "policy_epsilon" => num!(cfg.policy_optim.epsilon, f64),
                "policy_clip" => num!(cfg.policy_optim.clip, f64),
                "disc_lr" => num!(cfg.disc_optim.lr, f64),
                "disc_decay" => num!(cfg.disc_optim.decay, f64),
                "disc_epsilon" => num!(cfg.disc_optim.epsilon, f64),
                "disc_clip" => num!(cfg.disc_optim.clip, f64),
                "disc_batch" => num!(cfg.disc_batch, usize),
                "rollout_len" => num!(cfg.rollout_len, usize),
                "episode_len" => num!(cfg.episode_len, usize),
                "gamma" => num!(cfg.gamma, f64),
                "reward_scale" => num!(cfg.reward_scale, f64),
                "baseline_cost" => num!(cfg.baseline_cost, f64),
                "rp_cost" => num!(cfg.rp_cost, f64),
                "rp_batch" => num!(cfg.rp_batch, usize),
                "entropy_weight" => num!(cfg.entropy_weight, f64),
                "rho" => num!(cfg.rho, f64),
                "buffer_capacity" => num!(cfg.buffer_capacity, usize),
                "policy_workers" => num!(cfg.policy_workers, usize),
                "lambda" => num!(cfg.lambda, f64),
                "all_workers_feed_buffer" => num!(cfg.all_workers_feed_buffer, bool),
                "policy_trunk" => {
                    cfg.policy_trunk = TrunkKind::from_name(value).ok_or_else(|| bad(key, value))?
                }
                "disc_trunk" => {
                    cfg.disc_trunk = TrunkKind::from_name(value).ok_or_else(|| bad(key, value))?
                }
                "stem_c1" => num!(cfg.stem_c1, usize),
                "lstm_c2" => num!(cfg.lstm_c2, usize),
                "trunk_c" => num!(cfg.trunk_c, usize),
                "hidden" => num!(cfg.hidden, usize),
                other => {
                    if strict {
                        return Err(ConfigError::UnknownKey(n, other.to_string()));
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn split_kv(raw: &str) -> Option<(&str, &str)> {
    let line = raw.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return None;
    }
    let (k, v) = line.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return None;
    }
    Some((k, v))
}
