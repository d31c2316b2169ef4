//! One-dimensional runner on a track with randomly placed obstacles.
//!
//! Leaning forward accelerates the runner. Crossing an obstacle while the
//! posture is upright costs speed (a stumble); crossing one while leaning
//! past `posture_instability_threshold` puts the runner into an absorbing
//! unstable regime: posture diverges and the episode ends in a fall within
//! `unstable_collapse_steps` steps whatever the agent does afterwards.
//!
//! Observation: `[velocity / max_speed, posture, gap to next obstacle,
//! gap to the one after]`, gaps scaled by `sensor_range` and clipped to 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{clamp_action, EnvError, Environment, StepInfo, StepResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObstacleRunnerConfig {
    pub episode_cap: usize,
    /// Probability of an obstacle per unit of track.
    pub obstacle_density: f64,
    pub posture_instability_threshold: f64,
    pub unstable_collapse_steps: usize,
    /// Seed used by [`ObstacleRunner::reset_default`].
    pub rng_seed: u64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_lean: f64,
    /// Fraction of the gap to the commanded lean closed per step.
    pub posture_response: f64,
    pub propulsion: f64,
    pub drag: f64,
    /// Velocity multiplier for an upright collision.
    pub stumble_factor: f64,
    pub posture_noise: f64,
    /// Obstacle-free run-up at the start of the track.
    pub start_clearance: f64,
    pub sensor_range: f64,
}

impl Default for ObstacleRunnerConfig {
    fn default() -> Self {
        Self {
            episode_cap: 1000,
            obstacle_density: 0.08,
            posture_instability_threshold: 0.35,
            unstable_collapse_steps: 8,
            rng_seed: 0,
            dt: 0.1,
            max_speed: 10.0,
            max_lean: 1.0,
            posture_response: 0.5,
            propulsion: 2.0,
            drag: 0.25,
            stumble_factor: 0.4,
            posture_noise: 0.02,
            start_clearance: 5.0,
            sensor_range: 10.0,
        }
    }
}

impl ObstacleRunnerConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::Config(m.to_string()));
        if self.episode_cap < 1 {
            return bad("episode_cap must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.obstacle_density) {
            return bad("obstacle_density must lie in [0, 1]");
        }
        if self.unstable_collapse_steps < 1 {
            return bad("unstable_collapse_steps must be at least 1");
        }
        if !(self.posture_instability_threshold > 0.0) {
            return bad("posture_instability_threshold must be positive");
        }
        if !(self.dt > 0.0 && self.max_speed > 0.0 && self.sensor_range > 0.0) {
            return bad("dt, max_speed and sensor_range must be positive");
        }
        if !(0.0 < self.posture_response && self.posture_response <= 1.0) {
            return bad("posture_response must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.stumble_factor) || self.posture_noise < 0.0 {
            return bad("stumble_factor must lie in [0, 1] and posture_noise be non-negative");
        }
        Ok(())
    }
}

/// Full dynamic state, exposed for constructing test fixtures.
#[derive(Clone, Debug, PartialEq)]
pub struct RunnerState {
    pub position: f64,
    pub velocity: f64,
    pub posture: f64,
    pub unstable: bool,
    /// Steps spent in the unstable regime.
    pub collapse_counter: usize,
    pub steps: usize,
    pub done: bool,
}

impl RunnerState {
    fn at_rest() -> Self {
        Self {
            position: 0.0,
            velocity: 0.0,
            posture: 0.0,
            unstable: false,
            collapse_counter: 0,
            steps: 0,
            done: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObstacleRunner {
    cfg: ObstacleRunnerConfig,
    state: RunnerState,
    /// Sorted obstacle positions.
    obstacles: Vec<f64>,
    next_obstacle: usize,
    noise_rng: ChaCha8Rng,
}

impl ObstacleRunner {
    pub fn new(cfg: ObstacleRunnerConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let seed = cfg.rng_seed;
        let mut env = Self {
            cfg,
            state: RunnerState::at_rest(),
            obstacles: Vec::new(),
            next_obstacle: 0,
            noise_rng: ChaCha8Rng::seed_from_u64(0),
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn config(&self) -> &ObstacleRunnerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RunnerState {
        &self.state
    }

    pub fn obstacles(&self) -> &[f64] {
        &self.obstacles
    }

    pub fn reset_default(&mut self) -> Vec<f64> {
        self.reset(self.cfg.rng_seed)
    }

    /// Overrides the dynamic state, e.g. to force the unstable regime.
    pub fn set_state(&mut self, state: RunnerState) {
        self.state = state;
        self.sync_cursor();
    }

    /// Replaces the obstacle map (positions are sorted).
    pub fn set_obstacles(&mut self, mut obstacles: Vec<f64>) {
        obstacles.sort_by(f64::total_cmp);
        self.obstacles = obstacles;
        self.sync_cursor();
    }

    fn sync_cursor(&mut self) {
        let x = self.state.position;
        self.next_obstacle = self.obstacles.partition_point(|&o| o <= x);
    }

    fn track_length(&self) -> f64 {
        self.cfg.max_speed * self.cfg.dt * self.cfg.episode_cap as f64 + 2.0 * self.cfg.sensor_range
    }

    fn place_obstacles(&mut self, rng: &mut ChaCha8Rng) {
        self.obstacles.clear();
        let mut cell = self.cfg.start_clearance.floor();
        let end = self.track_length();
        while cell < end {
            if rng.random::<f64>() < self.cfg.obstacle_density {
                let pos = cell + rng.random::<f64>();
                if pos > self.cfg.start_clearance {
                    self.obstacles.push(pos);
                }
            }
            cell += 1.0;
        }
    }

    fn gap(&self, ahead: usize) -> f64 {
        let range = self.cfg.sensor_range;
        self.obstacles
            .get(self.next_obstacle + ahead)
            .map_or(1.0, |o| ((o - self.state.position) / range).min(1.0))
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![
            self.state.velocity / self.cfg.max_speed,
            self.state.posture,
            self.gap(0),
            self.gap(1),
        ]
    }

    /// Would crossing an obstacle with this posture trigger instability?
    pub fn is_unsafe_posture(&self, posture: f64) -> bool {
        posture.abs() > self.cfg.posture_instability_threshold
    }

    /// True when every action sequence drawn from `grid` ends the episode
    /// in a fall within `horizon` steps. Exhaustive search over clones;
    /// `grid` should stay small.
    pub fn is_doomed(&self, grid: &[f64], horizon: usize) -> bool {
        if self.state.done {
            return self.state.unstable;
        }
        if horizon == 0 || grid.is_empty() {
            return false;
        }
        grid.iter().all(|&a| {
            let mut next = self.clone();
            next.step(&[a]).expect("grid actions are finite");
            next.is_doomed(grid, horizon - 1)
        })
    }

    /// True when taking `action` now leaves only falling futures, checked
    /// with [`ObstacleRunner::is_doomed`] over `unstable_collapse_steps`.
    pub fn is_dooming_action(&self, action: f64, grid: &[f64]) -> Result<bool, EnvError> {
        let mut next = self.clone();
        let r = next.step(&[action])?;
        if r.terminal {
            return Ok(r.info.fell);
        }
        Ok(next.is_doomed(grid, self.cfg.unstable_collapse_steps))
    }

    fn collapse_step(&mut self) {
        let c = &self.cfg;
        let s = &mut self.state;
        s.collapse_counter += 1;
        let direction = if s.posture >= 0.0 { 1.0 } else { -1.0 };
        s.posture += direction * 0.5 * s.collapse_counter as f64;
        s.velocity *= 0.6;
        s.position += s.velocity * c.dt;
    }

    fn stable_step(&mut self, lean: f64) {
        let c = &self.cfg;
        let noise = if c.posture_noise > 0.0 {
            c.posture_noise * self.noise_rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        let s = &mut self.state;
        s.posture += c.posture_response * (lean * c.max_lean - s.posture) + noise;
        let accel = c.propulsion * s.posture - c.drag * s.velocity;
        s.velocity = (s.velocity + accel * c.dt).clamp(0.0, c.max_speed);
        let next = s.position + s.velocity * c.dt;

        let mut crossed = false;
        while self
            .obstacles
            .get(self.next_obstacle)
            .is_some_and(|&o| o <= next)
        {
            crossed = true;
            self.next_obstacle += 1;
        }
        let s = &mut self.state;
        if crossed {
            if s.posture.abs() > c.posture_instability_threshold {
                s.unstable = true;
                s.collapse_counter = 0;
            } else {
                s.velocity *= c.stumble_factor;
            }
        }
        s.position = next;
    }
}

impl Environment for ObstacleRunner {
    fn observation_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.place_obstacles(&mut rng);
        self.noise_rng = ChaCha8Rng::seed_from_u64(rng.random());
        self.state = RunnerState::at_rest();
        self.next_obstacle = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.state.done {
            return Err(EnvError::StepAfterTerminal);
        }
        let action = clamp_action(action, 1)?;
        let before = self.state.position;
        if self.state.unstable {
            self.collapse_step();
        } else {
            self.stable_step(action[0]);
        }
        self.sync_cursor();
        self.state.steps += 1;

        let fell = self.state.unstable
            && (self.state.collapse_counter >= self.cfg.unstable_collapse_steps
                || self.state.steps >= self.cfg.episode_cap);
        let timed_out = !fell && self.state.steps >= self.cfg.episode_cap;
        self.state.done = fell || timed_out;
        Ok(StepResult {
            observation: self.observation(),
            reward: self.state.position - before,
            terminal: self.state.done,
            info: StepInfo {
                fell,
                timed_out,
                distance: Some(self.state.position),
            },
        })
    }

    fn steps_taken(&self) -> usize {
        self.state.steps
    }
}
