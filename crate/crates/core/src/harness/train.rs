use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, TrainingMode};
use super::HarnessError;
use crate::ace::{ace_train_on_batch, ace_train_step, EnsembleTrainer};
use crate::ddpg::{OuParams, ReplayBuffer};
use crate::envs::{EnvError, Environment, Pipeline};
use crate::numerics::{checkpoint_save, MlpParameters};
use crate::rollout::{
    derive_seed, run_workers, EpisodeStats, RolloutControl, SnapshotSource, Worker, WorkerConfig,
};

const INIT_STREAM: u64 = 1;
const SAMPLING_STREAM: u64 = 2;
const WORKER_STREAM: u64 = 100;
const JOINT_STREAM: u64 = 0x101E;

/// Builds a fresh environment pipeline as configured.
pub fn make_env(cfg: &ExperimentConfig) -> Result<Pipeline<Box<dyn Environment>>, EnvError> {
    Pipeline::new(cfg.environment.build()?, cfg.pipeline)
}

/// One finished training episode.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    /// Which independently trained member produced it (0 for joint runs).
    pub member: usize,
    pub stats: EpisodeStats,
    /// Seconds since the member's training started.
    pub wall_time: f64,
}

pub const CURVE_FILE: &str = "learning_curve.csv";
pub const WALL_TIME_FILE: &str = "wall_time.csv";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

pub fn actor_file(i: usize) -> String {
    format!("actor_{i}.ckpt")
}

pub fn critic_file(i: usize) -> String {
    format!("critic_{i}.ckpt")
}

/// What a training run produced.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub actors: Vec<MlpParameters>,
    pub critics: Vec<MlpParameters>,
    pub curve: Vec<CurveRow>,
}

fn worker_config(cfg: &ExperimentConfig, seed: u64, noise: OuParams) -> WorkerConfig {
    let count = cfg.training.worker_count;
    WorkerConfig {
        worker_count: count,
        seeds: (0..count as u64)
            .map(|w| derive_seed(seed, WORKER_STREAM + w))
            .collect(),
        snapshot_refresh_interval: cfg.training.snapshot_refresh_interval,
        noise: vec![noise; count],
        random_steps: cfg.hyperparameters.warmup_steps.div_ceil(count),
        episodes_per_worker: None,
    }
}

fn ready_to_train(cfg: &ExperimentConfig, collected: usize, buffer_len: usize) -> bool {
    collected > cfg.hyperparameters.warmup_steps && buffer_len >= cfg.hyperparameters.batch_size
}

/// Collects `training.total_steps` transitions and performs one train step
/// per collected step after warmup. A single worker runs serially and is
/// bit-reproducible; more workers run on threads.
pub fn train_ensemble(
    cfg: &ExperimentConfig,
    trainer: &mut EnsembleTrainer,
    seed: u64,
    noise: OuParams,
    on_checkpoint: &mut dyn FnMut(usize, &EnsembleTrainer) -> Result<(), HarnessError>,
) -> Result<Vec<(EpisodeStats, f64)>, HarnessError> {
    let wcfg = worker_config(cfg, seed, noise);
    let total = cfg.training.total_steps;
    let hp = &cfg.hyperparameters;
    let probe = make_env(cfg)?;
    let mut buffer = ReplayBuffer::new(
        hp.buffer_capacity.min(total.max(1)),
        probe.state_dim(),
        probe.action_dim(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SAMPLING_STREAM));
    let source = SnapshotSource::new(trainer.policy());
    let refresh = cfg.training.snapshot_refresh_interval;
    let checkpoint_due = |before: usize, after: usize| {
        cfg.training
            .checkpoint_interval
            .is_some_and(|k| after / k > before / k)
    };
    let started = Instant::now();

    if wcfg.worker_count == 1 {
        let mut worker = Worker::new(0, &wcfg, probe, &source)?;
        let mut episodes = Vec::new();
        for collected in 1..=total {
            let step = worker.step(&source)?;
            buffer.store(step.transition)?;
            if let Some(stats) = step.finished {
                episodes.push((stats, started.elapsed().as_secs_f64()));
            }
            if ready_to_train(cfg, collected, buffer.len()) {
                ace_train_step(trainer, &buffer, hp, &mut rng)?;
            }
            if collected % refresh == 0 {
                source.publish(trainer.policy())?;
            }
            if checkpoint_due(collected - 1, collected) {
                on_checkpoint(collected, trainer)?;
            }
        }
        return Ok(episodes);
    }

    let buffer = Mutex::new(buffer);
    let control = RolloutControl::new(Some(total));
    let episodes = Mutex::new(Vec::new());
    let factory = |_: usize| make_env(cfg);
    let record = |s: &EpisodeStats| {
        episodes
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push((s.clone(), started.elapsed().as_secs_f64()));
    };
    let (report, trained) = std::thread::scope(|scope| -> Result<_, HarnessError> {
        let rollout =
            scope.spawn(|| run_workers(&wcfg, &factory, &source, &buffer, &control, &record));
        let mut trained = 0usize;
        let mut last_checkpoint = 0usize;
        let mut learn = || -> Result<(), HarnessError> {
            loop {
                let collected = control.collected();
                let finished = rollout.is_finished();
                let target = collected.saturating_sub(hp.warmup_steps);
                let batch = {
                    let buf = buffer.lock().unwrap_or_else(|e| e.into_inner());
                    if trained < target && ready_to_train(cfg, collected, buf.len()) {
                        Some(buf.sample_batch(hp.batch_size, &mut rng)?)
                    } else {
                        None
                    }
                };
                match batch {
                    Some(batch) => {
                        ace_train_on_batch(trainer, &batch, hp)?;
                        trained += 1;
                        if trained.is_multiple_of(refresh) {
                            source.publish(trainer.policy())?;
                        }
                    }
                    None if finished => return Ok(()),
                    None => std::thread::yield_now(),
                }
                if checkpoint_due(last_checkpoint, collected) {
                    on_checkpoint(collected, trainer)?;
                    last_checkpoint = collected;
                }
            }
        };
        if let Err(e) = learn() {
            control.stop();
            return Err(e);
        }
        let report = rollout.join().expect("rollout thread does not panic")?;
        Ok((report, trained))
    })?;
    if !report.failures.is_empty() {
        let f = &report.failures[0];
        return Err(HarnessError::Worker(format!(
            "worker {}: {}",
            f.worker, f.message
        )));
    }
    log::info!("collected {} steps, trained {trained}", control.collected());
    let mut episodes = episodes.into_inner().unwrap_or_else(|e| e.into_inner());
    episodes.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(episodes)
}

fn save_networks(
    dir: &Path,
    actors: &[(usize, &MlpParameters)],
    critics: &[(usize, &MlpParameters)],
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for (i, a) in actors {
        let p = dir.join(actor_file(*i));
        checkpoint_save(a, &p).map_err(|e| HarnessError::io(&p, e))?;
    }
    for (i, c) in critics {
        let p = dir.join(critic_file(*i));
        checkpoint_save(c, &p).map_err(|e| HarnessError::io(&p, e))?;
    }
    Ok(())
}

fn write_curves(run_dir: &Path, rows: &[CurveRow]) -> Result<(), HarnessError> {
    let path = run_dir.join(CURVE_FILE);
    let mut curve = csv::Writer::from_path(&path).map_err(|e| HarnessError::csv(&path, e))?;
    let header = [
        "member",
        "worker",
        "episode",
        "total_reward",
        "steps",
        "env_steps",
        "fell",
        "timed_out",
    ];
    curve
        .write_record(header)
        .map_err(|e| HarnessError::csv(&path, e))?;
    for r in rows {
        let s = &r.stats;
        curve
            .write_record([
                r.member.to_string(),
                s.worker.to_string(),
                s.episode.to_string(),
                s.total_reward.to_string(),
                s.steps.to_string(),
                s.env_steps.to_string(),
                s.fell.to_string(),
                s.timed_out.to_string(),
            ])
            .map_err(|e| HarnessError::csv(&path, e))?;
    }
    curve.flush().map_err(|e| HarnessError::io(&path, e))?;

    let path = run_dir.join(WALL_TIME_FILE);
    let mut wall = csv::Writer::from_path(&path).map_err(|e| HarnessError::csv(&path, e))?;
    wall.write_record(["member", "worker", "episode", "seconds"])
        .map_err(|e| HarnessError::csv(&path, e))?;
    for r in rows {
        wall.write_record([
            r.member.to_string(),
            r.stats.worker.to_string(),
            r.stats.episode.to_string(),
            format!("{:.3}", r.wall_time),
        ])
        .map_err(|e| HarnessError::csv(&path, e))?;
    }
    wall.flush().map_err(|e| HarnessError::io(&path, e))
}

/// Trains the configured ensemble into `run_dir`: config echo, final and
/// periodic checkpoints, per-episode learning curve and wall-time sidecar.
pub fn cmd_train(cfg: &ExperimentConfig, run_dir: &Path) -> Result<TrainSummary, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(run_dir).map_err(|e| HarnessError::io(run_dir, e))?;
    let echo = run_dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo, cfg.to_toml()).map_err(|e| HarnessError::io(&echo, e))?;

    let probe = make_env(cfg)?;
    let (sd, ad) = (probe.state_dim(), probe.action_dim());
    let checkpoints = run_dir.join("checkpoints");
    let mut curve = Vec::new();
    let (actors, critics) = match cfg.ensemble.mode {
        TrainingMode::Independent => {
            let mut actors = Vec::new();
            let mut critics = Vec::new();
            for plan in cfg.member_plans() {
                let mut init = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, INIT_STREAM));
                let mut trainer = EnsembleTrainer::init(sd, ad, 1, 1, &plan.network, &mut init)?;
                let i = plan.index;
                let episodes =
                    train_ensemble(cfg, &mut trainer, plan.seed, plan.noise, &mut |step, t| {
                        save_networks(
                            &checkpoints.join(format!("step-{step}")),
                            &[(i, &t.actors[0])],
                            &[(i, &t.critics[0])],
                        )
                    })?;
                log::info!("member {i} finished {} episodes", episodes.len());
                curve.extend(episodes.into_iter().map(|(stats, wall_time)| CurveRow {
                    member: i,
                    stats,
                    wall_time,
                }));
                actors.extend(trainer.actors);
                critics.extend(trainer.critics);
            }
            (actors, critics)
        }
        TrainingMode::Joint => {
            let seed = derive_seed(cfg.seed, JOINT_STREAM);
            let mut init = ChaCha8Rng::seed_from_u64(derive_seed(seed, INIT_STREAM));
            let e = &cfg.ensemble;
            let mut trainer =
                EnsembleTrainer::init(sd, ad, e.actors, e.critics, &cfg.network, &mut init)?;
            let episodes = train_ensemble(
                cfg,
                &mut trainer,
                seed,
                cfg.hyperparameters.noise,
                &mut |step, t| {
                    let a: Vec<_> = t.actors.iter().enumerate().collect();
                    let c: Vec<_> = t.critics.iter().enumerate().collect();
                    save_networks(&checkpoints.join(format!("step-{step}")), &a, &c)
                },
            )?;
            curve.extend(episodes.into_iter().map(|(stats, wall_time)| CurveRow {
                member: 0,
                stats,
                wall_time,
            }));
            (trainer.actors, trainer.critics)
        }
    };
    let a: Vec<_> = actors.iter().enumerate().collect();
    let c: Vec<_> = critics.iter().enumerate().collect();
    save_networks(run_dir, &a, &c)?;
    write_curves(run_dir, &curve)?;
    Ok(TrainSummary {
        run_dir: run_dir.to_path_buf(),
        actors,
        critics,
        curve,
    })
}
