use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::ExperimentConfig;
use super::train::{actor_file, critic_file, make_env};
use super::HarnessError;
use crate::ace::EnsemblePolicy;
use crate::envs::{TrajectoryRecord, TrajectoryWriter};
use crate::numerics::checkpoint_load;

/// An `A{N}C{M}` ensemble shape: N actors scored by M critics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnsembleLabel {
    pub actors: usize,
    pub critics: usize,
}

impl EnsembleLabel {
    pub const BASELINE: Self = Self {
        actors: 1,
        critics: 0,
    };
}

impl fmt::Display for EnsembleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}C{}", self.actors, self.critics)
    }
}

impl FromStr for EnsembleLabel {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::Label(format!("{s:?} is not of the form A<N>C<M>"));
        let rest = s.strip_prefix('A').ok_or_else(bad)?;
        let (n, m) = rest.split_once('C').ok_or_else(bad)?;
        let actors: usize = n.parse().map_err(|_| bad())?;
        let critics: usize = m.parse().map_err(|_| bad())?;
        if actors < 1 {
            return Err(HarnessError::Label(format!(
                "{s}: at least one actor is required"
            )));
        }
        if !(critics == 0 || critics == 1 || critics == actors) {
            return Err(HarnessError::Label(format!(
                "{s}: critic count must be 0, 1 or {actors}"
            )));
        }
        if critics == 0 && actors != 1 {
            return Err(HarnessError::Label(format!(
                "{s}: several actors need critics to choose"
            )));
        }
        Ok(Self { actors, critics })
    }
}

/// Loads actors `0..N` and critics `0..M` from `dir`. With one critic and
/// several actors, the critic paired with actor 0 is used.
pub fn load_ensemble(dir: &Path, label: EnsembleLabel) -> Result<EnsemblePolicy, HarnessError> {
    let load = |name: String| -> Result<_, HarnessError> {
        let path = dir.join(name);
        if !path.exists() {
            return Err(HarnessError::MissingCheckpoint(path));
        }
        checkpoint_load(&path).map_err(|e| HarnessError::Checkpoint {
            path: path.clone(),
            message: e.to_string(),
        })
    };
    let actors = (0..label.actors)
        .map(|i| load(actor_file(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let critics = (0..label.critics)
        .map(|i| load(critic_file(i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EnsemblePolicy::new(actors, critics)?)
}

/// Table-style summary of deterministic evaluation episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub label: String,
    /// Indexed by evaluation episode.
    pub rewards: Vec<f64>,
    pub fell: Vec<bool>,
    pub steps: Vec<usize>,
    pub average_reward: f64,
    pub max_reward: f64,
    pub fall_count: usize,
    pub fall_reward_threshold: f64,
}

impl EvaluationReport {
    pub fn from_episodes(
        label: String,
        rewards: Vec<f64>,
        fell: Vec<bool>,
        steps: Vec<usize>,
        fall_reward_threshold: f64,
    ) -> Self {
        let average_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
        let max_reward = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fall_count = rewards
            .iter()
            .zip(&fell)
            .filter(|(r, f)| **f || **r < fall_reward_threshold)
            .count();
        Self {
            label,
            rewards,
            fell,
            steps,
            average_reward,
            max_reward,
            fall_count,
            fall_reward_threshold,
        }
    }

    pub fn episodes(&self) -> usize {
        self.rewards.len()
    }

    /// One summary row: label, episodes, average, max, falls, threshold.
    pub fn write_summary(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
        w.write_record([
            "label",
            "episodes",
            "average_reward",
            "max_reward",
            "fall_count",
            "fall_reward_threshold",
        ])
        .map_err(|e| HarnessError::csv(path, e))?;
        w.write_record([
            self.label.clone(),
            self.episodes().to_string(),
            self.average_reward.to_string(),
            self.max_reward.to_string(),
            self.fall_count.to_string(),
            self.fall_reward_threshold.to_string(),
        ])
        .map_err(|e| HarnessError::csv(path, e))?;
        w.flush().map_err(|e| HarnessError::io(path, e))
    }

    /// Raw per-episode results, for histograms.
    pub fn write_rewards(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
        w.write_record(["episode", "reward", "fell", "steps"])
            .map_err(|e| HarnessError::csv(path, e))?;
        for (i, ((r, f), s)) in self
            .rewards
            .iter()
            .zip(&self.fell)
            .zip(&self.steps)
            .enumerate()
        {
            w.write_record([i.to_string(), r.to_string(), f.to_string(), s.to_string()])
                .map_err(|e| HarnessError::csv(path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }
}

/// One noise-free episode's outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub reward: f64,
    pub fell: bool,
    pub steps: usize,
}

/// Runs evaluation episode `episode` with `policy`, optionally recording
/// every step with its selection trace.
pub fn run_evaluation_episode(
    cfg: &ExperimentConfig,
    policy: &EnsemblePolicy,
    episode: usize,
    mut trajectory: Option<&mut Vec<TrajectoryRecord>>,
) -> Result<EpisodeOutcome, HarnessError> {
    let mut env = make_env(cfg)?;
    let mut state = env.reset(cfg.evaluation_seed(episode));
    let mut outcome = EpisodeOutcome {
        reward: 0.0,
        fell: false,
        steps: 0,
    };
    loop {
        let (action, trace) = policy.select_action(&state)?;
        let r = env.step(&action)?;
        outcome.reward += r.reward;
        outcome.steps += 1;
        if let Some(records) = trajectory.as_deref_mut() {
            records.push(TrajectoryRecord {
                episode,
                step: outcome.steps - 1,
                observation: state,
                action,
                reward: r.reward,
                terminal: r.terminal,
                fell: r.info.fell,
                critic_scores: (!trace.scores.is_empty()).then_some(trace.scores),
                chosen_index: Some(trace.chosen_index),
            });
        }
        if r.terminal {
            outcome.fell = r.info.fell;
            return Ok(outcome);
        }
        state = r.observation;
    }
}

/// Evaluates `policy` over `episodes` deterministic episodes. The result
/// depends only on the policy, the config and the episode count.
pub fn evaluate_policy(
    cfg: &ExperimentConfig,
    policy: &EnsemblePolicy,
    episodes: usize,
    fall_reward_threshold: f64,
    trajectory: Option<&mut Vec<TrajectoryRecord>>,
) -> Result<EvaluationReport, HarnessError> {
    if episodes < 1 {
        return Err(HarnessError::Config {
            field: "evaluation.episodes".into(),
            message: "at least one episode is required".into(),
        });
    }
    let mut trajectory = trajectory;
    let traced = cfg.evaluation.trajectory_episodes;
    let mut outcomes = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let sink = if i < traced {
            trajectory.as_deref_mut()
        } else {
            None
        };
        outcomes.push(run_evaluation_episode(cfg, policy, i, sink)?);
    }
    Ok(EvaluationReport::from_episodes(
        policy.label(),
        outcomes.iter().map(|o| o.reward).collect(),
        outcomes.iter().map(|o| o.fell).collect(),
        outcomes.iter().map(|o| o.steps).collect(),
        fall_reward_threshold,
    ))
}

/// 30% of the best episode reward of the single-actor baseline, or no
/// reward cutoff when that best episode is not positive.
pub fn baseline_fall_threshold(baseline_max_reward: f64) -> f64 {
    if baseline_max_reward > 0.0 {
        0.3 * baseline_max_reward
    } else {
        f64::NEG_INFINITY
    }
}

/// Configured threshold, or one derived from evaluating actor 0 alone.
pub fn resolve_fall_threshold(
    cfg: &ExperimentConfig,
    run_dir: &Path,
    episodes: usize,
) -> Result<f64, HarnessError> {
    if let Some(t) = cfg.evaluation.fall_reward_threshold {
        return Ok(t);
    }
    let baseline = load_ensemble(run_dir, EnsembleLabel::BASELINE)?;
    let report = evaluate_policy(cfg, &baseline, episodes, f64::NEG_INFINITY, None)?;
    Ok(baseline_fall_threshold(report.max_reward))
}

pub fn summary_file(label: EnsembleLabel) -> String {
    format!("eval_{label}.csv")
}

pub fn rewards_file(label: EnsembleLabel) -> String {
    format!("eval_{label}_rewards.csv")
}

pub fn trajectory_file(label: EnsembleLabel) -> String {
    format!("trajectory_{label}.csv")
}

/// Loads the `label` ensemble from `run_dir`, evaluates it and writes the
/// summary row, the raw rewards and any requested trajectories next to the
/// checkpoints. `output_dir` overrides where the reports go.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    run_dir: &Path,
    label: EnsembleLabel,
    episodes: usize,
    output_dir: Option<&Path>,
) -> Result<EvaluationReport, HarnessError> {
    let policy = load_ensemble(run_dir, label)?;
    if policy.label() != label.to_string() {
        return Err(HarnessError::Label(format!(
            "requested {label} but loaded {}",
            policy.label()
        )));
    }
    let threshold = resolve_fall_threshold(cfg, run_dir, episodes)?;
    let mut trajectory = Vec::new();
    let report = evaluate_policy(cfg, &policy, episodes, threshold, Some(&mut trajectory))?;
    let out: PathBuf = output_dir.unwrap_or(run_dir).to_path_buf();
    fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
    report.write_summary(&out.join(summary_file(label)))?;
    report.write_rewards(&out.join(rewards_file(label)))?;
    if !trajectory.is_empty() {
        let path = out.join(trajectory_file(label));
        let file = fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut w = TrajectoryWriter::new(file);
        for record in &trajectory {
            w.write(record).map_err(|e| HarnessError::csv(&path, e))?;
        }
        w.finish().map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(report)
}
