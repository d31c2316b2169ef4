//! Experiment orchestration: configuration, training runs, ensemble
//! evaluation and controlled ablations, all emitting CSV.

mod ablation;
mod config;
mod evaluate;
mod train;

pub use ablation::{
    cmd_ablate_activation, cmd_ablate_workers, default_evaluation_label, AblationRun,
};
pub use config::{
    EnsembleConfig, EvaluationConfig, ExperimentConfig, MemberOverride, MemberPlan, TrainingConfig,
    TrainingMode,
};
pub use evaluate::{
    baseline_fall_threshold, cmd_evaluate, evaluate_policy, load_ensemble, resolve_fall_threshold,
    rewards_file, run_evaluation_episode, summary_file, trajectory_file, EnsembleLabel,
    EpisodeOutcome, EvaluationReport,
};
pub use train::{
    actor_file, cmd_train, critic_file, make_env, train_ensemble, CurveRow, TrainSummary,
    CONFIG_ECHO_FILE, CURVE_FILE, WALL_TIME_FILE,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ace::AceError;
use crate::ddpg::DdpgError;
use crate::envs::EnvError;
use crate::rollout::RolloutError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("bad ensemble label: {0}")]
    Label(String),
    #[error("checkpoint {} not found", .0.display())]
    MissingCheckpoint(PathBuf),
    #[error("checkpoint {}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("rollout worker failed: {0}")]
    Worker(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ace(#[from] AceError),
    #[error(transparent)]
    Ddpg(#[from] DdpgError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub(crate) fn csv(path: &Path, e: csv::Error) -> Self {
        Self::io(path, e)
    }
}
