//! Actor-critic ensembles: several actors propose, the averaged critics
//! pick, and joint training bootstraps from the best proposal.

mod ensemble;
mod training;

pub use ensemble::{
    argmax_first, mean_critic_batch, score_action, score_actions, EnsemblePolicy, SelectionMode,
    SelectionTrace,
};
pub use training::{
    ace_bellman_target, ace_bellman_target_mean, ace_targets_batch, ace_train_on_batch,
    ace_train_step, AceTrainStats, EnsembleTrainer,
};

use thiserror::Error;

use crate::ddpg::DdpgError;
use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AceError {
    #[error("an ensemble needs at least one actor")]
    NoActors,
    #[error("critic scoring needs at least one critic")]
    NoCritics,
    #[error("{0} actors without critics: selection is undefined")]
    CriticlessEnsemble(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Ddpg(#[from] DdpgError),
}
