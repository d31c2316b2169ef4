use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, StepResult};

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn observation_dim(&self) -> usize {
        (**self).observation_dim()
    }
    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        (**self).reset(seed)
    }
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        (**self).step(action)
    }
    fn steps_taken(&self) -> usize {
        (**self).steps_taken()
    }
}

/// Repeats `action` for `k` simulator steps, stopping early at a terminal.
/// Rewards are summed; the last observation and info are returned.
pub fn frame_skip_step<E: Environment + ?Sized>(
    env: &mut E,
    action: &[f64],
    k: usize,
) -> Result<StepResult, EnvError> {
    if k < 1 {
        return Err(EnvError::Config("frame skip k must be at least 1".into()));
    }
    let mut result = env.step(action)?;
    for _ in 1..k {
        if result.terminal {
            break;
        }
        let next = env.step(action)?;
        result = StepResult {
            reward: result.reward + next.reward,
            ..next
        };
    }
    Ok(result)
}

/// Concatenation of the `k` most recent observations, oldest first.
#[derive(Clone, Debug)]
pub struct ObservationStack {
    k: usize,
    base_len: usize,
    history: VecDeque<Vec<f64>>,
}

impl ObservationStack {
    pub fn new(k: usize, base_len: usize) -> Result<Self, EnvError> {
        if k < 1 {
            return Err(EnvError::Config("stack depth must be at least 1".into()));
        }
        Ok(Self {
            k,
            base_len,
            history: VecDeque::with_capacity(k),
        })
    }

    pub fn depth(&self) -> usize {
        self.k
    }

    pub fn stacked_len(&self) -> usize {
        self.k * self.base_len
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }

    pub fn push(&mut self, obs: &[f64]) -> Result<Vec<f64>, EnvError> {
        if obs.len() != self.base_len {
            return Err(EnvError::ObservationDim {
                expected: self.base_len,
                got: obs.len(),
            });
        }
        if self.history.len() == self.k {
            self.history.pop_front();
        }
        self.history.push_back(obs.to_vec());
        Ok(self.stacked())
    }

    /// Current stacked state; missing history repeats the earliest frame.
    pub fn stacked(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.stacked_len());
        if let Some(first) = self.history.front() {
            for _ in self.history.len()..self.k {
                out.extend_from_slice(first);
            }
        }
        for frame in &self.history {
            out.extend_from_slice(frame);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub frame_skip: usize,
    pub stack_depth: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frame_skip: 4,
            stack_depth: 3,
        }
    }
}

/// An environment seen through action repeat and observation stacking:
/// the agent-level view used by training and evaluation.
#[derive(Clone, Debug)]
pub struct Pipeline<E> {
    env: E,
    cfg: PipelineConfig,
    stack: ObservationStack,
    done: bool,
}

impl<E: Environment> Pipeline<E> {
    pub fn new(env: E, cfg: PipelineConfig) -> Result<Self, EnvError> {
        if cfg.frame_skip < 1 {
            return Err(EnvError::Config("frame_skip must be at least 1".into()));
        }
        let stack = ObservationStack::new(cfg.stack_depth, env.observation_dim())?;
        Ok(Self {
            env,
            cfg,
            stack,
            done: true,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.stack.stacked_len()
    }

    pub fn action_dim(&self) -> usize {
        self.env.action_dim()
    }

    pub fn config(&self) -> PipelineConfig {
        self.cfg
    }

    pub fn inner(&self) -> &E {
        &self.env
    }

    pub fn inner_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let obs = self.env.reset(seed);
        self.stack.clear();
        self.done = false;
        self.stack
            .push(&obs)
            .expect("environment observation length is fixed")
    }

    /// Current stacked state.
    pub fn state(&self) -> Vec<f64> {
        self.stack.stacked()
    }

    /// One agent decision: the action is repeated `frame_skip` times and the
    /// returned observation is the stacked state.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        let mut result = frame_skip_step(&mut self.env, action, self.cfg.frame_skip)?;
        self.done = result.terminal;
        result.observation = self.stack.push(&result.observation)?;
        Ok(result)
    }
}
