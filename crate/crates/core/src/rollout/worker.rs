use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::snapshot::{PolicySnapshot, SnapshotSource};
use super::RolloutError;
use crate::ace::SelectionTrace;
use crate::ddpg::{OuNoise, OuParams, ReplayBuffer, Transition};
use crate::envs::{EnvError, Environment, Pipeline};

/// Builds the environment for worker `i`.
pub type EnvFactory<'a> =
    dyn Fn(usize) -> Result<Pipeline<Box<dyn Environment>>, EnvError> + Sync + 'a;

/// Mixes a stream index into a base seed (splitmix64 finalizer), so every
/// stochastic component gets its own well-separated seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerConfig {
    pub worker_count: usize,
    pub seeds: Vec<u64>,
    pub snapshot_refresh_interval: usize,
    /// One entry per worker.
    pub noise: Vec<OuParams>,
    /// Uniformly random actions each worker takes before using the policy.
    pub random_steps: usize,
    /// Stop each worker after this many episodes.
    pub episodes_per_worker: Option<usize>,
}

impl WorkerConfig {
    /// `count` workers with seeds derived from `seed` and shared noise.
    pub fn uniform(count: usize, seed: u64, noise: OuParams) -> Self {
        Self {
            worker_count: count,
            seeds: (0..count as u64).map(|i| derive_seed(seed, i)).collect(),
            snapshot_refresh_interval: 500,
            noise: vec![noise; count],
            random_steps: 0,
            episodes_per_worker: None,
        }
    }

    pub fn validate(&self) -> Result<(), RolloutError> {
        let bad = |m: String| Err(RolloutError::Config(m));
        if self.worker_count < 1 {
            return bad("worker_count must be at least 1".into());
        }
        if self.seeds.len() != self.worker_count || self.noise.len() != self.worker_count {
            return bad(format!(
                "{} workers need as many seeds and noise settings, got {} and {}",
                self.worker_count,
                self.seeds.len(),
                self.noise.len()
            ));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("worker seeds must be pairwise distinct".into());
        }
        if self.snapshot_refresh_interval < 1 {
            return bad("snapshot_refresh_interval must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub worker: usize,
    pub episode: usize,
    pub total_reward: f64,
    /// Agent decisions, i.e. pipeline steps.
    pub steps: usize,
    /// Raw environment steps underneath the frame skip.
    pub env_steps: usize,
    pub fell: bool,
    pub timed_out: bool,
}

/// Writes [`EpisodeStats`] as CSV with a header row.
pub struct EpisodeStatsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> EpisodeStatsWriter<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record([
            "worker",
            "episode",
            "total_reward",
            "steps",
            "env_steps",
            "fell",
            "timed_out",
        ])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, s: &EpisodeStats) -> csv::Result<()> {
        self.inner.write_record([
            s.worker.to_string(),
            s.episode.to_string(),
            s.total_reward.to_string(),
            s.steps.to_string(),
            s.env_steps.to_string(),
            s.fell.to_string(),
            s.timed_out.to_string(),
        ])
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

/// What one worker step produced.
#[derive(Clone, Debug)]
pub struct WorkerStep {
    pub transition: Transition,
    /// Absent while acting randomly.
    pub trace: Option<SelectionTrace>,
    pub finished: Option<EpisodeStats>,
}

/// One experience collector. Stepping it directly gives the serial,
/// fully deterministic collection loop.
pub struct Worker {
    id: usize,
    seed: u64,
    env: Pipeline<Box<dyn Environment>>,
    noise: OuNoise,
    rng: ChaCha8Rng,
    snapshot: Arc<PolicySnapshot>,
    refresh_interval: usize,
    steps_since_refresh: usize,
    random_steps_left: usize,
    episode: usize,
    state: Option<Vec<f64>>,
    episode_reward: f64,
    episode_steps: usize,
}

impl Worker {
    pub fn new(
        id: usize,
        cfg: &WorkerConfig,
        env: Pipeline<Box<dyn Environment>>,
        source: &SnapshotSource,
    ) -> Result<Self, RolloutError> {
        cfg.validate()?;
        if id >= cfg.worker_count {
            return Err(RolloutError::Config(format!(
                "worker {id} of {}",
                cfg.worker_count
            )));
        }
        let snapshot = source.latest();
        if snapshot.policy.state_dim() != env.state_dim()
            || snapshot.policy.action_dim() != env.action_dim()
        {
            return Err(RolloutError::Config(format!(
                "policy maps {} -> {} but the environment has state {} and action {}",
                snapshot.policy.state_dim(),
                snapshot.policy.action_dim(),
                env.state_dim(),
                env.action_dim()
            )));
        }
        let seed = cfg.seeds[id];
        Ok(Self {
            id,
            seed,
            noise: OuNoise::new(env.action_dim(), cfg.noise[id]),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX)),
            env,
            snapshot,
            refresh_interval: cfg.snapshot_refresh_interval,
            steps_since_refresh: 0,
            random_steps_left: cfg.random_steps,
            episode: 0,
            state: None,
            episode_reward: 0.0,
            episode_steps: 0,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn episodes_completed(&self) -> usize {
        self.episode
    }

    pub fn snapshot_version(&self) -> u64 {
        self.snapshot.version
    }

    /// Seed of the environment reset for `episode`.
    pub fn episode_seed(&self, episode: usize) -> u64 {
        derive_seed(self.seed, episode as u64)
    }

    pub fn step(&mut self, source: &SnapshotSource) -> Result<WorkerStep, RolloutError> {
        let state = match self.state.take() {
            Some(s) => s,
            None => {
                self.noise.reset();
                self.episode_reward = 0.0;
                self.episode_steps = 0;
                self.env.reset(self.episode_seed(self.episode))
            }
        };
        if self.steps_since_refresh >= self.refresh_interval {
            self.snapshot = source.latest();
            self.steps_since_refresh = 0;
        }
        self.steps_since_refresh += 1;

        let (action, trace) = if self.random_steps_left > 0 {
            self.random_steps_left -= 1;
            let a = (0..self.env.action_dim())
                .map(|_| self.rng.random_range(-1.0..=1.0))
                .collect();
            (a, None)
        } else {
            let (mut a, trace) = self.snapshot.policy.select_action(&state)?;
            for (a, n) in a.iter_mut().zip(self.noise.step(&mut self.rng)) {
                *a = (*a + n).clamp(-1.0, 1.0);
            }
            (a, Some(trace))
        };

        let r = self.env.step(&action)?;
        self.episode_reward += r.reward;
        self.episode_steps += 1;
        let transition = Transition {
            state,
            action,
            reward: r.reward,
            next_state: r.observation.clone(),
            terminal: r.bootstrap_terminal(),
            worker: self.id,
        };
        let finished = if r.terminal {
            let stats = EpisodeStats {
                worker: self.id,
                episode: self.episode,
                total_reward: self.episode_reward,
                steps: self.episode_steps,
                env_steps: self.env.inner().steps_taken(),
                fell: r.info.fell,
                timed_out: r.info.timed_out,
            };
            self.episode += 1;
            Some(stats)
        } else {
            self.state = Some(r.observation);
            None
        };
        Ok(WorkerStep {
            transition,
            trace,
            finished,
        })
    }
}

/// Shared step budget and stop flag for a set of workers.
#[derive(Debug)]
pub struct RolloutControl {
    budget: usize,
    claimed: AtomicUsize,
    collected: AtomicUsize,
    stop: AtomicBool,
}

impl RolloutControl {
    /// `budget` caps the total number of transitions over all workers.
    pub fn new(budget: Option<usize>) -> Self {
        Self {
            budget: budget.unwrap_or(usize::MAX),
            claimed: AtomicUsize::new(0),
            collected: AtomicUsize::new(0),
            stop: AtomicBool::new(false),
        }
    }

    fn try_claim(&self) -> bool {
        !self.is_stopped() && self.claimed.fetch_add(1, Ordering::SeqCst) < self.budget
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    /// Transitions stored in the buffer so far.
    pub fn collected(&self) -> usize {
        self.collected.load(Ordering::SeqCst)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerFailure {
    pub worker: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct RolloutReport {
    /// Sorted by worker, then episode.
    pub episodes: Vec<EpisodeStats>,
    pub failures: Vec<WorkerFailure>,
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "worker panicked".into())
}

fn worker_loop(
    id: usize,
    cfg: &WorkerConfig,
    env_factory: &EnvFactory<'_>,
    source: &SnapshotSource,
    buffer: &Mutex<ReplayBuffer>,
    control: &RolloutControl,
    on_episode: &(dyn Fn(&EpisodeStats) + Sync),
    episodes: &mut Vec<EpisodeStats>,
) -> Result<(), RolloutError> {
    let mut worker = Worker::new(id, cfg, env_factory(id)?, source)?;
    while cfg
        .episodes_per_worker
        .is_none_or(|e| worker.episodes_completed() < e)
        && control.try_claim()
    {
        let step = worker.step(source)?;
        buffer
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .store(step.transition)?;
        control.collected.fetch_add(1, Ordering::SeqCst);
        if let Some(stats) = step.finished {
            on_episode(&stats);
            episodes.push(stats);
        }
    }
    Ok(())
}

/// Runs `cfg.worker_count` workers on scoped threads until each finishes
/// its episodes, the step budget runs out or `control` is stopped. A
/// failing worker is reported and the others keep going.
pub fn run_workers(
    cfg: &WorkerConfig,
    env_factory: &EnvFactory<'_>,
    source: &SnapshotSource,
    buffer: &Mutex<ReplayBuffer>,
    control: &RolloutControl,
    on_episode: &(dyn Fn(&EpisodeStats) + Sync),
) -> Result<RolloutReport, RolloutError> {
    cfg.validate()?;
    let outcomes: Vec<(Vec<EpisodeStats>, Option<WorkerFailure>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.worker_count)
            .map(|id| {
                scope.spawn(move || {
                    let mut episodes = Vec::new();
                    let run = catch_unwind(AssertUnwindSafe(|| {
                        worker_loop(
                            id,
                            cfg,
                            env_factory,
                            source,
                            buffer,
                            control,
                            on_episode,
                            &mut episodes,
                        )
                    }));
                    let failure = match run {
                        Ok(Ok(())) => None,
                        Ok(Err(e)) => Some(e.to_string()),
                        Err(payload) => Some(panic_message(payload.as_ref())),
                    }
                    .map(|message| {
                        log::warn!("worker {id} failed: {message}");
                        WorkerFailure {
                            worker: id,
                            message,
                        }
                    });
                    (episodes, failure)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .expect("worker panics are caught inside the thread")
            })
            .collect()
    });
    let mut report = RolloutReport::default();
    for (episodes, failure) in outcomes {
        report.episodes.extend(episodes);
        report.failures.extend(failure);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ace::EnsemblePolicy;
    use crate::envs::{Pendulum, PendulumConfig, PipelineConfig, StepInfo, StepResult};
    use crate::numerics::{Activation, MlpParameters};

    fn short_pendulum(_: usize) -> Result<Pipeline<Box<dyn Environment>>, EnvError> {
        let env = Pendulum::new(PendulumConfig {
            episode_cap: 40,
            ..Default::default()
        })?;
        Pipeline::new(
            Box::new(env) as Box<dyn Environment>,
            PipelineConfig::default(),
        )
    }

    fn policy() -> EnsemblePolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = MlpParameters::init(
            &[9, 8, 1],
            Activation::Selu,
            Activation::Tanh,
            1.0,
            &mut rng,
        )
        .unwrap();
        let c = MlpParameters::init(
            &[10, 8, 1],
            Activation::Selu,
            Activation::Linear,
            1.0,
            &mut rng,
        )
        .unwrap();
        EnsemblePolicy::new(vec![a.clone(), a], vec![c]).unwrap()
    }

    fn config(count: usize, episodes: usize) -> WorkerConfig {
        WorkerConfig {
            random_steps: 7,
            episodes_per_worker: Some(episodes),
            ..WorkerConfig::uniform(count, 99, OuParams::default())
        }
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 1000);
        assert_eq!(derive_seed(7, 3), seeds[3]);
        assert_ne!(derive_seed(8, 3), seeds[3]);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = config(2, 1);
        cfg.seeds[1] = cfg.seeds[0];
        assert!(cfg.validate().is_err());
        let mut cfg = config(2, 1);
        cfg.snapshot_refresh_interval = 0;
        assert!(cfg.validate().is_err());
        assert!(config(0, 1).validate().is_err());
        let mut cfg = config(2, 1);
        cfg.noise.pop();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_worker_matches_serial_loop() {
        let cfg = config(1, 3);
        let source = SnapshotSource::new(policy());
        let buffer = Mutex::new(ReplayBuffer::new(10_000, 9, 1).unwrap());
        let report = run_workers(
            &cfg,
            &short_pendulum,
            &source,
            &buffer,
            &RolloutControl::new(None),
            &|_| {},
        )
        .unwrap();
        assert!(report.failures.is_empty());

        let mut worker = Worker::new(0, &cfg, short_pendulum(0).unwrap(), &source).unwrap();
        let mut serial = Vec::new();
        let mut episodes = Vec::new();
        while worker.episodes_completed() < 3 {
            let step = worker.step(&source).unwrap();
            serial.push(step.transition);
            episodes.extend(step.finished);
        }
        let threaded: Vec<Transition> = buffer.into_inner().unwrap().iter().cloned().collect();
        assert_eq!(threaded, serial);
        assert_eq!(report.episodes, episodes);
    }

    #[test]
    fn buffer_holds_every_episode_step_with_worker_ids() {
        let cfg = config(3, 2);
        let source = SnapshotSource::new(policy());
        let buffer = Mutex::new(ReplayBuffer::new(10_000, 9, 1).unwrap());
        let seen = AtomicUsize::new(0);
        let report = run_workers(
            &cfg,
            &short_pendulum,
            &source,
            &buffer,
            &RolloutControl::new(None),
            &|_| {
                seen.fetch_add(1, Ordering::SeqCst);
            },
        )
        .unwrap();
        assert_eq!(report.episodes.len(), 6);
        assert_eq!(seen.load(Ordering::SeqCst), 6);
        let total: usize = report.episodes.iter().map(|e| e.steps).sum();
        let buffer = buffer.into_inner().unwrap();
        assert_eq!(buffer.len(), total);
        assert!(buffer.iter().all(|t| t.worker < cfg.worker_count));
        for w in 0..3 {
            let mine: usize = report
                .episodes
                .iter()
                .filter(|e| e.worker == w)
                .map(|e| e.steps)
                .sum();
            assert_eq!(buffer.iter().filter(|t| t.worker == w).count(), mine);
        }
        // The pendulum only ends on its cap, so nothing is bootstrap-terminal.
        assert!(report.episodes.iter().all(|e| e.timed_out && !e.fell));
        assert!(buffer.iter().all(|t| !t.terminal));
    }

    #[test]
    fn step_budget_caps_collection() {
        let cfg = WorkerConfig {
            episodes_per_worker: None,
            ..config(2, 0)
        };
        let source = SnapshotSource::new(policy());
        let buffer = Mutex::new(ReplayBuffer::new(10_000, 9, 1).unwrap());
        let control = RolloutControl::new(Some(25));
        run_workers(&cfg, &short_pendulum, &source, &buffer, &control, &|_| {}).unwrap();
        assert_eq!(buffer.into_inner().unwrap().len(), 25);
        assert_eq!(control.collected(), 25);
    }

    #[test]
    fn snapshot_refresh_follows_interval() {
        let mut cfg = config(1, 10);
        cfg.snapshot_refresh_interval = 4;
        let source = SnapshotSource::new(policy());
        let mut worker = Worker::new(0, &cfg, short_pendulum(0).unwrap(), &source).unwrap();
        source.publish(policy()).unwrap();
        let mut versions = Vec::new();
        for _ in 0..6 {
            worker.step(&source).unwrap();
            versions.push(worker.snapshot_version());
        }
        assert_eq!(versions, [0, 0, 0, 0, 1, 1]);
    }

    struct Faulty {
        steps: usize,
    }

    impl Environment for Faulty {
        fn observation_dim(&self) -> usize {
            3
        }
        fn action_dim(&self) -> usize {
            1
        }
        fn reset(&mut self, _: u64) -> Vec<f64> {
            vec![0.0; 3]
        }
        fn step(&mut self, _: &[f64]) -> Result<StepResult, EnvError> {
            self.steps += 1;
            if self.steps == 5 {
                panic!("simulator crashed");
            }
            Ok(StepResult {
                observation: vec![0.0; 3],
                reward: 0.0,
                terminal: false,
                info: StepInfo::default(),
            })
        }
        fn steps_taken(&self) -> usize {
            self.steps
        }
    }

    #[test]
    fn failing_workers_are_reported_and_others_finish() {
        let cfg = config(3, 2);
        let factory = |i: usize| -> Result<Pipeline<Box<dyn Environment>>, EnvError> {
            match i {
                1 => Pipeline::new(
                    Box::new(Faulty { steps: 0 }) as Box<dyn Environment>,
                    PipelineConfig::default(),
                ),
                2 => Err(EnvError::Config("no simulator for worker 2".into())),
                _ => short_pendulum(i),
            }
        };
        let source = SnapshotSource::new(policy());
        let buffer = Mutex::new(ReplayBuffer::new(10_000, 9, 1).unwrap());
        let report = run_workers(
            &cfg,
            &factory,
            &source,
            &buffer,
            &RolloutControl::new(None),
            &|_| {},
        )
        .unwrap();
        let failed: Vec<usize> = report.failures.iter().map(|f| f.worker).collect();
        assert_eq!(failed, [1, 2]);
        assert!(report.failures[0].message.contains("simulator crashed"));
        assert_eq!(report.episodes.len(), 2);
        assert!(report.episodes.iter().all(|e| e.worker == 0));
    }

    #[test]
    fn stats_csv_has_header() {
        let mut w = EpisodeStatsWriter::new(Vec::new()).unwrap();
        w.write(&EpisodeStats {
            worker: 1,
            episode: 2,
            total_reward: -3.5,
            steps: 10,
            env_steps: 40,
            fell: true,
            timed_out: false,
        })
        .unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(
            text,
            "worker,episode,total_reward,steps,env_steps,fell,timed_out\n1,2,-3.5,10,40,true,false\n"
        );
    }
}
