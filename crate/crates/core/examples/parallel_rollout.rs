//! Four rollout workers fill one shared replay buffer while reading a
//! published policy snapshot; per-episode stats stream out as CSV.

use std::sync::Mutex;

use ace_rl::ace::EnsemblePolicy;
use ace_rl::ddpg::{NetworkConfig, OuParams, ReplayBuffer};
use ace_rl::envs::{
    EnvError, Environment, ObstacleRunner, ObstacleRunnerConfig, Pipeline, PipelineConfig,
};
use ace_rl::rollout::{
    run_workers, EpisodeStatsWriter, RolloutControl, SnapshotSource, WorkerConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn runner(_worker: usize) -> Result<Pipeline<Box<dyn Environment>>, EnvError> {
    let env = ObstacleRunner::new(ObstacleRunnerConfig::default())?;
    Pipeline::new(
        Box::new(env) as Box<dyn Environment>,
        PipelineConfig::default(),
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let probe = runner(0)?;
    let (sd, ad) = (probe.state_dim(), probe.action_dim());
    let net = NetworkConfig::default();
    let policy = EnsemblePolicy::new(vec![net.build_actor(sd, ad, &mut rng)?], vec![])?;
    let source = SnapshotSource::new(policy);

    let cfg = WorkerConfig {
        random_steps: 200,
        ..WorkerConfig::uniform(4, 9, OuParams::default())
    };
    let buffer = Mutex::new(ReplayBuffer::new(100_000, sd, ad)?);
    let control = RolloutControl::new(Some(5_000));
    let writer = Mutex::new(EpisodeStatsWriter::new(std::io::stdout())?);
    let report = run_workers(&cfg, &runner, &source, &buffer, &control, &|stats| {
        writer
            .lock()
            .unwrap()
            .write(stats)
            .expect("stdout is writable");
    })?;
    writer.into_inner().unwrap().finish()?;

    let buffer = buffer.into_inner().unwrap();
    eprintln!(
        "{} transitions from {} episodes, {} worker failures",
        buffer.len(),
        report.episodes.len(),
        report.failures.len()
    );
    for w in 0..cfg.worker_count {
        eprintln!(
            "  worker {w}: {} transitions",
            buffer.iter().filter(|t| t.worker == w).count()
        );
    }
    Ok(())
}
