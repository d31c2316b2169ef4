use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{clamp_action, EnvError, Environment, StepInfo, StepResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumConfig {
    pub episode_cap: usize,
    pub max_speed: f64,
    pub max_torque: f64,
    pub dt: f64,
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self {
            episode_cap: 200,
            max_speed: 8.0,
            max_torque: 2.0,
            dt: 0.05,
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
        }
    }
}

/// Torque-limited pendulum swing-up. Angle 0 is upright; the reward is the
/// negative quadratic cost of angle, angular velocity and torque.
#[derive(Clone, Debug)]
pub struct Pendulum {
    cfg: PendulumConfig,
    theta: f64,
    theta_dot: f64,
    steps: usize,
    done: bool,
}

pub(crate) fn normalize_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Pendulum {
    pub fn new(cfg: PendulumConfig) -> Result<Self, EnvError> {
        if cfg.episode_cap == 0 || cfg.dt <= 0.0 || cfg.max_torque <= 0.0 {
            return Err(EnvError::Config(
                "pendulum needs episode_cap >= 1 and positive dt and torque".into(),
            ));
        }
        Ok(Self {
            cfg,
            theta: PI,
            theta_dot: 0.0,
            steps: 0,
            done: false,
        })
    }

    pub fn config(&self) -> &PendulumConfig {
        &self.cfg
    }

    /// `(theta, theta_dot)`.
    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
        self.done = false;
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    /// Cost paid for being at `(theta, theta_dot)` while applying `torque`.
    pub fn cost(theta: f64, theta_dot: f64, torque: f64) -> f64 {
        let th = normalize_angle(theta);
        th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque
    }
}

impl Environment for Pendulum {
    fn observation_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.theta = rng.random_range(-PI..PI);
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        let action = clamp_action(action, 1)?;
        let c = &self.cfg;
        let u = action[0] * c.max_torque;
        let reward = -Self::cost(self.theta, self.theta_dot, u);

        let accel = 3.0 * c.gravity / (2.0 * c.length) * self.theta.sin()
            + 3.0 / (c.mass * c.length * c.length) * u;
        self.theta_dot = (self.theta_dot + accel * c.dt).clamp(-c.max_speed, c.max_speed);
        self.theta += self.theta_dot * c.dt;
        self.steps += 1;

        let timed_out = self.steps >= c.episode_cap;
        self.done = timed_out;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: timed_out,
            info: StepInfo {
                fell: false,
                timed_out,
                distance: None,
            },
        })
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_deterministic_and_shaped() {
        let mut env = Pendulum::new(PendulumConfig::default()).unwrap();
        let a = env.reset(7);
        let b = env.reset(7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_ne!(env.reset(8), a);
    }

    #[test]
    fn hanging_rest_is_an_equilibrium() {
        let mut env = Pendulum::new(PendulumConfig::default()).unwrap();
        env.set_state(PI, 0.0);
        for _ in 0..200 {
            env.step(&[0.0]).unwrap();
        }
        let (theta, theta_dot) = env.state();
        assert!((normalize_angle(theta).abs() - PI).abs() < 1e-6);
        assert!(theta_dot.abs() < 1e-6);
    }

    #[test]
    fn times_out_at_cap() {
        let cfg = PendulumConfig {
            episode_cap: 3,
            ..Default::default()
        };
        let mut env = Pendulum::new(cfg).unwrap();
        env.reset(1);
        assert!(!env.step(&[0.5]).unwrap().terminal);
        assert!(!env.step(&[0.5]).unwrap().terminal);
        let last = env.step(&[0.5]).unwrap();
        assert!(last.terminal && last.info.timed_out && !last.bootstrap_terminal());
        assert_eq!(env.step(&[0.0]), Err(EnvError::StepAfterTerminal));
    }

    #[test]
    fn clamps_out_of_range_torque() {
        let mut a = Pendulum::new(PendulumConfig::default()).unwrap();
        let mut b = a.clone();
        a.reset(3);
        b.reset(3);
        assert_eq!(a.step(&[5.0]).unwrap(), b.step(&[1.0]).unwrap());
        assert!(a.step(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn upright_rest_has_zero_cost() {
        assert_eq!(Pendulum::cost(0.0, 0.0, 0.0), 0.0);
        assert_eq!(Pendulum::cost(2.0 * PI, 0.0, 0.0), 0.0);
    }
}
