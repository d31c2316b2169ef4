use ndarray::{Array1, Array2};
use rand::Rng;

use super::DdpgError;

/// One experience tuple. `worker` records which rollout worker produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Bootstrap mask: true only for genuine absorbing ends, not time limits.
    pub terminal: bool,
    pub worker: usize,
}

/// A sampled minibatch laid out as row matrices.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Self {
        let n = items.len();
        let sd = items.first().map_or(0, |t| t.state.len());
        let ad = items.first().map_or(0, |t| t.action.len());
        let rows = |f: &dyn Fn(&Transition) -> &[f64], width: usize| {
            Array2::from_shape_vec(
                (n, width),
                items.iter().flat_map(|t| f(t).iter().copied()).collect(),
            )
            .expect("uniform transition shapes")
        };
        Self {
            states: rows(&|t| &t.state, sd),
            actions: rows(&|t| &t.action, ad),
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states: rows(&|t| &t.next_state, sd),
            terminals: items.iter().map(|t| t.terminal).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Bounded ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    storage: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 2_000_000;

    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self, DdpgError> {
        if capacity == 0 {
            return Err(DdpgError::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn store(&mut self, t: Transition) -> Result<(), DdpgError> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim {
            return Err(DdpgError::Shape(format!(
                "transition states have {}/{} values, buffer expects {}",
                t.state.len(),
                t.next_state.len(),
                self.state_dim
            )));
        }
        if t.action.len() != self.action_dim {
            return Err(DdpgError::Shape(format!(
                "transition action has {} values, buffer expects {}",
                t.action.len(),
                self.action_dim
            )));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, DdpgError> {
        if self.storage.is_empty() {
            return Err(DdpgError::EmptyBuffer);
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| rng.random_range(0..len)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>, DdpgError> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch, DdpgError> {
        Ok(Batch::from_transitions(&self.sample(n, rng)?))
    }
}
