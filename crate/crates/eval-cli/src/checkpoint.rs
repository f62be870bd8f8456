//! Loading trainer checkpoints without prior knowledge of their
//! architecture: the embedded config string says how to rebuild the models,
//! the `disc` metadata key says whether discriminator parameters are
//! present, and the container then verifies names and shapes exactly.

use agile_trainer::{load_checkpoint, ConfigError, TrainerConfig};
use neural_substrate::{meta_get, read_meta, CheckpointError, DiscParams, PolicyParams};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("checkpoint container: {0}")]
    Container(#[from] CheckpointError),
    #[error("checkpoint config: {0}")]
    Config(#[from] ConfigError),
    #[error("checkpoint metadata has no usable `disc` key")]
    MissingDiscKey,
    #[error("no checkpoint files under {0}")]
    NoCheckpoints(std::path::PathBuf),
}

/// A checkpoint rebuilt into live models.
pub struct LoadedCheckpoint {
    pub cfg: TrainerConfig,
    pub policy: PolicyParams<f32>,
    pub disc: Option<DiscParams<f32>>,
    pub meta: String,
}

/// Resolves a checkpoint argument: a file stands for itself; a directory
/// stands for whichever of its checkpoints records the highest mean
/// emitted reward, the selection rule for runs judged by the agent's own
/// reward model.
pub fn pick_checkpoint(path: &Path) -> Result<std::path::PathBuf, LoadError> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    let mut best: Option<(f64, std::path::PathBuf)> = None;
    for entry in std::fs::read_dir(path).map_err(CheckpointError::from)? {
        let p = entry.map_err(CheckpointError::from)?.path();
        if p.extension().and_then(|e| e.to_str()) != Some("gluc") {
            continue;
        }
        let meta = match read_meta(&p) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let reward: f64 = meta_get(&meta, "mean_reward")
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().map_or(true, |(r, _)| reward > *r) {
            best = Some((reward, p));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| LoadError::NoCheckpoints(path.to_path_buf()))
}

/// Reads a checkpoint file, reconstructs models of the architecture its
/// metadata describes, and loads the parameters into them. Fails if the
/// file is corrupt, the config is invalid, or the stored tensors do not
/// match the declared architecture.
pub fn load_trained(path: &Path) -> Result<LoadedCheckpoint, LoadError> {
    let meta = read_meta(path)?;
    let cfg = TrainerConfig::from_config_lenient(&meta)?;
    let has_disc = match meta_get(&meta, "disc") {
        Some("0") => false,
        Some("1") => true,
        _ => return Err(LoadError::MissingDiscKey),
    };
    let mut policy = PolicyParams::new(&cfg.policy_model());
    let mut disc = has_disc.then(|| DiscParams::new(&cfg.disc_model()));
    let meta = load_checkpoint(path, &mut policy, disc.as_mut())?;
    Ok(LoadedCheckpoint {
        cfg,
        policy,
        disc,
        meta,
    })
}
