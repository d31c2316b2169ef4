use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::ddpg::{DdpgHyperparameters, NetworkConfig, OuParams};
use crate::envs::{EnvSpec, PipelineConfig};
use crate::rollout::derive_seed;

/// How the members of an ensemble learn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// N separate actor-critic pairs, each with its own buffer.
    Independent,
    /// N actors and M critics updated together on one buffer.
    Joint,
}

/// Per-member settings that make independently trained pairs differ.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemberOverride {
    pub seed: Option<u64>,
    pub actor_hidden: Option<Vec<usize>>,
    pub critic_hidden: Option<Vec<usize>>,
    pub noise_sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub actors: usize,
    pub critics: usize,
    pub mode: TrainingMode,
    pub members: Vec<MemberOverride>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            actors: 1,
            critics: 1,
            mode: TrainingMode::Independent,
            members: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Environment transitions collected per training run.
    pub total_steps: usize,
    pub worker_count: usize,
    pub snapshot_refresh_interval: usize,
    /// Write intermediate checkpoints every this many collected steps.
    pub checkpoint_interval: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            total_steps: 50_000,
            worker_count: 1,
            snapshot_refresh_interval: 500,
            checkpoint_interval: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub episodes: usize,
    /// Episodes scoring below this count as falls. When unset, 30% of the
    /// best episode of the single-actor baseline is used.
    pub fall_reward_threshold: Option<f64>,
    /// Dump per-step selection traces for this many leading episodes.
    pub trajectory_episodes: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            fall_reward_threshold: None,
            trajectory_episodes: 0,
        }
    }
}

/// Everything one experiment needs; every field has a default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub environment: EnvSpec,
    pub pipeline: PipelineConfig,
    pub network: NetworkConfig,
    pub hyperparameters: DdpgHyperparameters,
    pub ensemble: EnsembleConfig,
    pub training: TrainingConfig,
    pub evaluation: EvaluationConfig,
}

/// Resolved settings of one actor-critic member.
#[derive(Clone, Debug, PartialEq)]
pub struct MemberPlan {
    pub index: usize,
    pub seed: u64,
    pub network: NetworkConfig,
    pub noise: OuParams,
}

const EVALUATION_STREAM: u64 = 0xE7A1;

fn field_error(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let e = &self.ensemble;
        if e.actors < 1 {
            return Err(field_error(
                "ensemble.actors",
                "at least one actor is required",
            ));
        }
        if !(e.critics == 0 || e.critics == 1 || e.critics == e.actors) {
            return Err(field_error(
                "ensemble.critics",
                format!(
                    "must be 0, 1 or the actor count {}, got {}",
                    e.actors, e.critics
                ),
            ));
        }
        match e.mode {
            TrainingMode::Independent if e.critics != e.actors => {
                return Err(field_error(
                    "ensemble.critics",
                    format!(
                        "independent pairs need one critic per actor, got {} for {}",
                        e.critics, e.actors
                    ),
                ))
            }
            TrainingMode::Joint if e.critics == 0 => {
                return Err(field_error(
                    "ensemble.critics",
                    "joint training needs at least one critic",
                ))
            }
            _ => {}
        }
        if e.members.len() > e.actors {
            return Err(field_error(
                "ensemble.members",
                format!("{} overrides for {} actors", e.members.len(), e.actors),
            ));
        }
        if e.mode == TrainingMode::Joint
            && e.members.iter().any(|m| *m != MemberOverride::default())
        {
            return Err(field_error(
                "ensemble.members",
                "per-member overrides need independent training",
            ));
        }
        for (i, m) in e.members.iter().enumerate() {
            if m.noise_sigma.is_some_and(|s| !(s >= 0.0)) {
                return Err(field_error(
                    &format!("ensemble.members[{i}].noise_sigma"),
                    "must be non-negative",
                ));
            }
            for (name, widths) in [
                ("actor_hidden", &m.actor_hidden),
                ("critic_hidden", &m.critic_hidden),
            ] {
                if widths.as_ref().is_some_and(|w| w.contains(&0)) {
                    return Err(field_error(
                        &format!("ensemble.members[{i}].{name}"),
                        "widths must be positive",
                    ));
                }
            }
        }
        if self.network.actor_hidden.contains(&0) || self.network.critic_hidden.contains(&0) {
            return Err(field_error("network", "hidden widths must be positive"));
        }
        self.hyperparameters
            .validate()
            .map_err(|err| field_error("hyperparameters", err.to_string()))?;
        let t = &self.training;
        if t.worker_count < 1 {
            return Err(field_error(
                "training.worker_count",
                "at least one worker is required",
            ));
        }
        if t.snapshot_refresh_interval < 1 {
            return Err(field_error(
                "training.snapshot_refresh_interval",
                "must be at least 1",
            ));
        }
        if t.checkpoint_interval == Some(0) {
            return Err(field_error(
                "training.checkpoint_interval",
                "must be at least 1",
            ));
        }
        if self.evaluation.episodes < 1 {
            return Err(field_error(
                "evaluation.episodes",
                "at least one episode is required",
            ));
        }
        if self.pipeline.frame_skip < 1 || self.pipeline.stack_depth < 1 {
            return Err(field_error(
                "pipeline",
                "frame_skip and stack_depth must be at least 1",
            ));
        }
        self.environment
            .build()
            .map_err(|err| field_error("environment", err.to_string()))?;
        Ok(())
    }

    /// `A{N}C{M}` of the configured ensemble.
    pub fn label(&self) -> String {
        format!("A{}C{}", self.ensemble.actors, self.ensemble.critics)
    }

    /// Settings of each independently trained member.
    pub fn member_plans(&self) -> Vec<MemberPlan> {
        (0..self.ensemble.actors)
            .map(|i| {
                let o = self.ensemble.members.get(i).cloned().unwrap_or_default();
                let mut network = self.network.clone();
                if let Some(w) = o.actor_hidden {
                    network.actor_hidden = w;
                }
                if let Some(w) = o.critic_hidden {
                    network.critic_hidden = w;
                }
                let mut noise = self.hyperparameters.noise;
                if let Some(s) = o.noise_sigma {
                    noise.sigma = s;
                }
                MemberPlan {
                    index: i,
                    seed: o.seed.unwrap_or_else(|| derive_seed(self.seed, i as u64)),
                    network,
                    noise,
                }
            })
            .collect()
    }

    /// Environment seed of evaluation episode `episode`; shared by every
    /// configuration evaluated under this config.
    pub fn evaluation_seed(&self, episode: usize) -> u64 {
        derive_seed(derive_seed(self.seed, EVALUATION_STREAM), episode as u64)
    }
}
