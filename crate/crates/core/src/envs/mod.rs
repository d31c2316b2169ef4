//! Continuous-control environments and the observation pipeline wrappers.
//!
//! Every environment is fully determined by its reset seed and the action
//! sequence applied to it.

mod obstacle_runner;
mod pendulum;
pub mod trajectory;
mod wrappers;

pub use obstacle_runner::{ObstacleRunner, ObstacleRunnerConfig, RunnerState};
pub use pendulum::{Pendulum, PendulumConfig};
pub use trajectory::{TrajectoryRecord, TrajectoryWriter};
pub use wrappers::{frame_skip_step, ObservationStack, Pipeline, PipelineConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called after the episode terminated; call reset first")]
    StepAfterTerminal,
    #[error("action has {got} coordinates, environment expects {expected}")]
    ActionDim { expected: usize, got: usize },
    #[error("observation has {got} values, stack expects {expected}")]
    ObservationDim { expected: usize, got: usize },
    #[error("non-finite action")]
    NonFiniteAction,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown environment '{0}'")]
    UnknownEnvironment(String),
}

/// Per-step diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepInfo {
    /// The episode ended in a fall (absorbing failure).
    pub fell: bool,
    /// The episode ended by hitting the step cap.
    pub timed_out: bool,
    /// Distance travelled since reset, where meaningful.
    pub distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub info: StepInfo,
}

impl StepResult {
    /// Terminal for bootstrapping purposes: time-limit endings bootstrap.
    pub fn bootstrap_terminal(&self) -> bool {
        self.terminal && !self.info.timed_out
    }
}

pub trait Environment: Send {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
    /// Underlying simulator steps since the last reset.
    fn steps_taken(&self) -> usize;
}

/// Environments selectable by name from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EnvSpec {
    Pendulum(PendulumConfig),
    ObstacleRunner(ObstacleRunnerConfig),
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec::ObstacleRunner(ObstacleRunnerConfig::default())
    }
}

impl EnvSpec {
    pub fn build(&self) -> Result<Box<dyn Environment>, EnvError> {
        Ok(match self {
            EnvSpec::Pendulum(cfg) => Box::new(Pendulum::new(cfg.clone())?),
            EnvSpec::ObstacleRunner(cfg) => Box::new(ObstacleRunner::new(cfg.clone())?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Pendulum(_) => "pendulum",
            EnvSpec::ObstacleRunner(_) => "obstacle-runner",
        }
    }
}

/// Clamps an action into `[-1, 1]`, warning when anything was out of range.
pub(crate) fn clamp_action(action: &[f64], expected: usize) -> Result<Vec<f64>, EnvError> {
    if action.len() != expected {
        return Err(EnvError::ActionDim {
            expected,
            got: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(EnvError::NonFiniteAction);
    }
    if action.iter().any(|a| a.abs() > 1.0) {
        log::warn!("action {action:?} outside [-1, 1]; clamping");
    }
    Ok(action.iter().map(|a| a.clamp(-1.0, 1.0)).collect())
}
