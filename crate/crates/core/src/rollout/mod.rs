//! Experience collection: workers run their own environment instances
//! against the latest published policy and feed one shared replay buffer.

mod snapshot;
mod worker;

pub use snapshot::{PolicySnapshot, SnapshotSource};
pub use worker::{
    derive_seed, run_workers, EnvFactory, EpisodeStats, EpisodeStatsWriter, RolloutControl,
    RolloutReport, Worker, WorkerConfig, WorkerFailure, WorkerStep,
};

use thiserror::Error;

use crate::ace::AceError;
use crate::ddpg::DdpgError;
use crate::envs::EnvError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RolloutError {
    #[error("invalid worker configuration: {0}")]
    Config(String),
    #[error("snapshot rejected: {0}")]
    NonFiniteSnapshot(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ace(#[from] AceError),
    #[error(transparent)]
    Ddpg(#[from] DdpgError),
}
