//! Deep deterministic policy gradient: replay, exploration noise, target
//! networks and the actor/critic updates.

mod agent;
mod noise;
mod replay;

pub use agent::{
    actor_ascent_step, actor_objective_gradient, bellman_target, bellman_targets_batch,
    critic_input, critic_regression_step, critic_value, ddpg_train_step, discounted, soft_update,
    DdpgAgent, DdpgHyperparameters, NetworkConfig, TrainStats,
};
pub use noise::{OuNoise, OuParams};
pub use replay::{Batch, ReplayBuffer, Transition};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdpgError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("replay buffer holds {available} transitions, a batch needs {required}")]
    InsufficientSamples { available: usize, required: usize },
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
