use std::fs;
use std::path::Path;

use super::config::ExperimentConfig;
use super::evaluate::{baseline_fall_threshold, evaluate_policy, EnsembleLabel, EvaluationReport};
use super::train::{cmd_train, CurveRow};
use super::HarnessError;
use crate::ace::EnsemblePolicy;
use crate::numerics::Activation;

/// One variant of a controlled comparison.
#[derive(Clone, Debug)]
pub struct AblationRun {
    pub variant: String,
    pub curve: Vec<CurveRow>,
    pub report: EvaluationReport,
}

/// Label evaluated after training: the plain actor for a single member,
/// the whole ensemble otherwise.
pub fn default_evaluation_label(cfg: &ExperimentConfig) -> EnsembleLabel {
    if cfg.ensemble.actors == 1 {
        EnsembleLabel::BASELINE
    } else {
        EnsembleLabel {
            actors: cfg.ensemble.actors,
            critics: cfg.ensemble.critics,
        }
    }
}

fn run_variant(
    cfg: &ExperimentConfig,
    variant: String,
    dir: &Path,
) -> Result<AblationRun, HarnessError> {
    let summary = cmd_train(cfg, dir)?;
    let label = default_evaluation_label(cfg);
    let critics = summary.critics[..label.critics].to_vec();
    let policy = EnsemblePolicy::new(summary.actors.clone(), critics)?;
    let episodes = cfg.evaluation.episodes;
    let threshold = match cfg.evaluation.fall_reward_threshold {
        Some(t) => t,
        None => {
            let baseline = EnsemblePolicy::new(vec![summary.actors[0].clone()], vec![])?;
            let report = evaluate_policy(cfg, &baseline, episodes, f64::NEG_INFINITY, None)?;
            baseline_fall_threshold(report.max_reward)
        }
    };
    let report = evaluate_policy(cfg, &policy, episodes, threshold, None)?;
    Ok(AblationRun {
        variant,
        curve: summary.curve,
        report,
    })
}

fn write_ablation(out: &Path, runs: &[AblationRun]) -> Result<(), HarnessError> {
    let path = out.join("ablation.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::csv(&path, e))?;
    w.write_record([
        "variant",
        "label",
        "episodes",
        "average_reward",
        "max_reward",
        "fall_count",
    ])
    .map_err(|e| HarnessError::csv(&path, e))?;
    for r in runs {
        w.write_record([
            r.variant.clone(),
            r.report.label.clone(),
            r.report.episodes().to_string(),
            r.report.average_reward.to_string(),
            r.report.max_reward.to_string(),
            r.report.fall_count.to_string(),
        ])
        .map_err(|e| HarnessError::csv(&path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;

    let path = out.join("curves.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::csv(&path, e))?;
    w.write_record([
        "variant",
        "member",
        "worker",
        "episode",
        "total_reward",
        "steps",
        "fell",
    ])
    .map_err(|e| HarnessError::csv(&path, e))?;
    for r in runs {
        for row in &r.curve {
            let s = &row.stats;
            w.write_record([
                r.variant.clone(),
                row.member.to_string(),
                s.worker.to_string(),
                s.episode.to_string(),
                s.total_reward.to_string(),
                s.steps.to_string(),
                s.fell.to_string(),
            ])
            .map_err(|e| HarnessError::csv(&path, e))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))
}

fn ablate<T>(
    cfg: &ExperimentConfig,
    values: &[T],
    out: &Path,
    name: impl Fn(&T) -> String,
    apply: impl Fn(&mut ExperimentConfig, &T),
) -> Result<Vec<AblationRun>, HarnessError> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        let mut variant_cfg = cfg.clone();
        apply(&mut variant_cfg, v);
        variant_cfg.validate()?;
        let variant = name(v);
        log::info!("ablation variant {variant}");
        runs.push(run_variant(
            &variant_cfg,
            variant.clone(),
            &out.join(&variant),
        )?);
    }
    write_ablation(out, &runs)?;
    Ok(runs)
}

/// Trains and evaluates one run per hidden activation, everything else
/// (seeds included) held fixed.
pub fn cmd_ablate_activation(
    cfg: &ExperimentConfig,
    kinds: &[Activation],
    out: &Path,
) -> Result<Vec<AblationRun>, HarnessError> {
    if kinds.is_empty() {
        return Err(HarnessError::Config {
            field: "kinds".into(),
            message: "at least one activation is required".into(),
        });
    }
    ablate(
        cfg,
        kinds,
        out,
        |k| k.to_string(),
        |c, k| c.network.hidden_activation = *k,
    )
}

/// Trains and evaluates one run per rollout worker count.
pub fn cmd_ablate_workers(
    cfg: &ExperimentConfig,
    counts: &[usize],
    out: &Path,
) -> Result<Vec<AblationRun>, HarnessError> {
    if counts.is_empty() {
        return Err(HarnessError::Config {
            field: "counts".into(),
            message: "at least one worker count is required".into(),
        });
    }
    ablate(
        cfg,
        counts,
        out,
        |n| format!("workers-{n}"),
        |c, n| c.training.worker_count = *n,
    )
}
