//! DDPG networks, Bellman targets and the gradient steps shared with the
//! ensemble trainer.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DdpgError, OuParams, ReplayBuffer, Transition};
use crate::numerics::{adam_step, Activation, AdamState, GradientBundle, MlpParameters};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgHyperparameters {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub tau: f64,
    pub warmup_steps: usize,
    pub buffer_capacity: usize,
    pub noise: OuParams,
}

impl Default for DdpgHyperparameters {
    fn default() -> Self {
        Self {
            gamma: 0.96,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            batch_size: 128,
            tau: 1e-3,
            warmup_steps: 1000,
            buffer_capacity: ReplayBuffer::DEFAULT_CAPACITY,
            noise: OuParams::default(),
        }
    }
}

impl DdpgHyperparameters {
    pub fn validate(&self) -> Result<(), DdpgError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(DdpgError::Config(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(DdpgError::Config(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if self.batch_size < 1 {
            return Err(DdpgError::Config("batch_size must be at least 1".into()));
        }
        if self.buffer_capacity < 1 {
            return Err(DdpgError::Config(
                "buffer_capacity must be at least 1".into(),
            ));
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0) {
            return Err(DdpgError::Config(
                "learning rates must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Hidden widths and activation shared by one actor-critic pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub hidden_activation: Activation,
    /// Multiplier on the actor's last-layer init range.
    pub actor_final_scale: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![64, 32],
            critic_hidden: vec![64, 32],
            hidden_activation: Activation::Selu,
            actor_final_scale: 1e-3,
        }
    }
}

impl NetworkConfig {
    pub fn build_actor<R: Rng + ?Sized>(
        &self,
        state_dim: usize,
        action_dim: usize,
        rng: &mut R,
    ) -> Result<MlpParameters, DdpgError> {
        let sizes: Vec<usize> = std::iter::once(state_dim)
            .chain(self.actor_hidden.iter().copied())
            .chain(std::iter::once(action_dim))
            .collect();
        Ok(MlpParameters::init(
            &sizes,
            self.hidden_activation,
            Activation::Tanh,
            self.actor_final_scale,
            rng,
        )?)
    }

    pub fn build_critic<R: Rng + ?Sized>(
        &self,
        state_dim: usize,
        action_dim: usize,
        rng: &mut R,
    ) -> Result<MlpParameters, DdpgError> {
        let sizes: Vec<usize> = std::iter::once(state_dim + action_dim)
            .chain(self.critic_hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        Ok(MlpParameters::init(
            &sizes,
            self.hidden_activation,
            Activation::Linear,
            1.0,
            rng,
        )?)
    }
}

/// `[states | actions]`, the critic's input layout.
pub fn critic_input(states: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Array2<f64> {
    concatenate(Axis(1), &[states, actions]).expect("matching batch sizes")
}

/// Evaluates one critic on a single `(state, action)` pair.
pub fn critic_value(
    critic: &MlpParameters,
    state: &[f64],
    action: &[f64],
) -> Result<f64, DdpgError> {
    let input: Vec<f64> = state.iter().chain(action).copied().collect();
    Ok(critic.predict(&input)?[0])
}

/// `r + gamma * (1 - terminal) * bootstrap`.
#[inline]
pub fn discounted(reward: f64, terminal: bool, gamma: f64, bootstrap: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * bootstrap
    }
}

/// `y = r + gamma (1 - d) Q'(s', mu'(s'))` for one transition.
pub fn bellman_target(
    t: &Transition,
    target_actor: &MlpParameters,
    target_critic: &MlpParameters,
    gamma: f64,
) -> Result<f64, DdpgError> {
    let next_action = target_actor.predict(&t.next_state)?;
    let q = critic_value(target_critic, &t.next_state, &next_action)?;
    Ok(discounted(t.reward, t.terminal, gamma, q))
}

/// Batched single-actor Bellman targets.
pub fn bellman_targets_batch(
    next_states: ArrayView2<'_, f64>,
    rewards: &Array1<f64>,
    terminals: &[bool],
    target_actor: &MlpParameters,
    target_critic: &MlpParameters,
    gamma: f64,
) -> Result<Array1<f64>, DdpgError> {
    let next_actions = target_actor.predict_batch(next_states)?;
    let q = target_critic.predict_batch(critic_input(next_states, next_actions.view()).view())?;
    Ok(rewards
        .iter()
        .zip(terminals)
        .zip(q.column(0))
        .map(|((&r, &d), &q)| discounted(r, d, gamma, q))
        .collect())
}

/// `target <- (1 - tau) target + tau source`, elementwise.
pub fn soft_update(
    target: &mut MlpParameters,
    source: &MlpParameters,
    tau: f64,
) -> Result<(), DdpgError> {
    if target.shapes() != source.shapes() {
        return Err(DdpgError::Shape(
            "soft update between different architectures".into(),
        ));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(DdpgError::Config(format!(
            "tau must lie in [0, 1], got {tau}"
        )));
    }
    for (t, s) in target.tensors_mut().zip(source.tensors()) {
        for (t, &s) in t.iter_mut().zip(s) {
            *t = if tau == 1.0 {
                s
            } else {
                (1.0 - tau) * *t + tau * s
            };
        }
    }
    Ok(())
}

/// One Adam step of mean-squared regression of `critic(inputs)` onto
/// `targets`. Returns the loss before the update.
pub fn critic_regression_step(
    critic: &mut MlpParameters,
    opt: &mut AdamState,
    learning_rate: f64,
    inputs: ArrayView2<'_, f64>,
    targets: &Array1<f64>,
) -> Result<f64, DdpgError> {
    let (q, cache) = critic.forward_batch(inputs)?;
    let n = targets.len() as f64;
    let residual = &q.column(0) - targets;
    let loss = residual.dot(&residual) / n;
    let upstream = residual.mapv(|r| 2.0 * r / n).insert_axis(Axis(1));
    let grads = critic.backward(&cache, upstream.view())?;
    adam_step(critic, &grads, opt, learning_rate)?;
    Ok(loss)
}

/// Mean over states of the critic-ensemble mean `Q(s, mu(s))`, and its
/// gradient with respect to the actor parameters (ascent direction).
pub fn actor_objective_gradient(
    actor: &MlpParameters,
    critics: &[MlpParameters],
    states: ArrayView2<'_, f64>,
) -> Result<(f64, GradientBundle), DdpgError> {
    if critics.is_empty() {
        return Err(DdpgError::Config(
            "actor update needs at least one critic".into(),
        ));
    }
    let (actions, actor_cache) = actor.forward_batch(states)?;
    let inputs = critic_input(states, actions.view());
    let batch = states.nrows();
    let state_dim = states.ncols();
    let weight = 1.0 / (batch as f64 * critics.len() as f64);
    let upstream = Array2::from_elem((batch, 1), weight);

    let mut action_grad = Array2::<f64>::zeros(actions.raw_dim());
    let mut objective = 0.0;
    for critic in critics {
        let (q, cache) = critic.forward_batch(inputs.view())?;
        objective += q.sum() * weight;
        let g = critic.backward(&cache, upstream.view())?;
        action_grad += &g.input.slice(s![.., state_dim..]);
    }
    let grads = actor.backward(&actor_cache, action_grad.view())?;
    Ok((objective, grads))
}

/// One Adam step ascending [`actor_objective_gradient`]. Returns the
/// objective before the update.
pub fn actor_ascent_step(
    actor: &mut MlpParameters,
    opt: &mut AdamState,
    learning_rate: f64,
    critics: &[MlpParameters],
    states: ArrayView2<'_, f64>,
) -> Result<f64, DdpgError> {
    let (objective, mut grads) = actor_objective_gradient(actor, critics, states)?;
    grads.scale(-1.0);
    adam_step(actor, &grads, opt, learning_rate)?;
    Ok(objective)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

/// One actor-critic pair with target copies and optimizer state.
#[derive(Clone, Debug)]
pub struct DdpgAgent {
    pub actor: MlpParameters,
    pub critic: MlpParameters,
    pub target_actor: MlpParameters,
    pub target_critic: MlpParameters,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        net: &NetworkConfig,
        rng: &mut R,
    ) -> Result<Self, DdpgError> {
        let actor = net.build_actor(state_dim, action_dim, rng)?;
        let critic = net.build_critic(state_dim, action_dim, rng)?;
        Ok(Self::from_networks(actor, critic))
    }

    pub fn from_networks(actor: MlpParameters, critic: MlpParameters) -> Self {
        Self {
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        }
    }

    /// Deterministic action of the online actor.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>, DdpgError> {
        Ok(self.actor.predict(state)?)
    }
}

/// Critic regression to the Bellman target, one deterministic policy
/// gradient step, then soft target updates.
pub fn ddpg_train_step<R: Rng + ?Sized>(
    agent: &mut DdpgAgent,
    buffer: &ReplayBuffer,
    hp: &DdpgHyperparameters,
    rng: &mut R,
) -> Result<TrainStats, DdpgError> {
    if buffer.len() < hp.batch_size {
        return Err(DdpgError::InsufficientSamples {
            available: buffer.len(),
            required: hp.batch_size,
        });
    }
    let batch = buffer.sample_batch(hp.batch_size, rng)?;
    let targets = bellman_targets_batch(
        batch.next_states.view(),
        &batch.rewards,
        &batch.terminals,
        &agent.target_actor,
        &agent.target_critic,
        hp.gamma,
    )?;
    let inputs = critic_input(batch.states.view(), batch.actions.view());
    let critic_loss = critic_regression_step(
        &mut agent.critic,
        &mut agent.critic_opt,
        hp.critic_lr,
        inputs.view(),
        &targets,
    )?;
    let actor_objective = actor_ascent_step(
        &mut agent.actor,
        &mut agent.actor_opt,
        hp.actor_lr,
        std::slice::from_ref(&agent.critic),
        batch.states.view(),
    )?;
    soft_update(&mut agent.target_critic, &agent.critic, hp.tau)?;
    soft_update(&mut agent.target_actor, &agent.actor, hp.tau)?;
    Ok(TrainStats {
        critic_loss,
        actor_objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Layer, RELATIVE_ERROR_FLOOR};
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Critic whose output is the constant `c`.
    fn constant_critic(input_dim: usize, c: f64) -> MlpParameters {
        MlpParameters::new(
            vec![
                Layer::new(Array2::zeros((3, input_dim)), Array1::zeros(3)).unwrap(),
                Layer::new(Array2::zeros((1, 3)), array![c]).unwrap(),
            ],
            Activation::Selu,
            Activation::Linear,
        )
        .unwrap()
    }

    fn transition(reward: f64, terminal: bool) -> Transition {
        Transition {
            state: vec![0.1, 0.2],
            action: vec![0.0],
            reward,
            next_state: vec![0.3, -0.4],
            terminal,
            worker: 0,
        }
    }

    fn small_agent(seed: u64) -> DdpgAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = NetworkConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            actor_final_scale: 1.0,
            ..Default::default()
        };
        DdpgAgent::new(2, 1, &net, &mut rng).unwrap()
    }

    #[test]
    fn bellman_target_arithmetic() {
        let agent = small_agent(0);
        let critic = constant_critic(3, 10.0);
        let y = bellman_target(&transition(1.0, false), &agent.actor, &critic, 0.96).unwrap();
        assert!((y - 10.6).abs() < 1e-12);
        let y = bellman_target(&transition(2.0, true), &agent.actor, &critic, 0.96).unwrap();
        assert_eq!(y, 2.0);
        let y = bellman_target(&transition(2.5, false), &agent.actor, &critic, 0.0).unwrap();
        assert_eq!(y, 2.5);
    }

    #[test]
    fn batched_targets_match_single() {
        let agent = small_agent(1);
        let ts: Vec<Transition> = (0..6)
            .map(|i| Transition {
                state: vec![i as f64 * 0.1, 0.0],
                action: vec![0.2],
                reward: i as f64,
                next_state: vec![0.5 - i as f64 * 0.2, 0.1 * i as f64],
                terminal: i % 3 == 0,
                worker: 0,
            })
            .collect();
        let refs: Vec<&Transition> = ts.iter().collect();
        let batch = super::super::Batch::from_transitions(&refs);
        let y = bellman_targets_batch(
            batch.next_states.view(),
            &batch.rewards,
            &batch.terminals,
            &agent.target_actor,
            &agent.target_critic,
            0.96,
        )
        .unwrap();
        for (t, y) in ts.iter().zip(y.iter()) {
            let single =
                bellman_target(t, &agent.target_actor, &agent.target_critic, 0.96).unwrap();
            assert_eq!(single.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn soft_update_extremes_and_midpoint() {
        let a = small_agent(1).actor;
        let b = small_agent(2).actor;
        let mut t = a.clone();
        soft_update(&mut t, &b, 1.0).unwrap();
        assert_eq!(t, b);
        let mut t = a.clone();
        soft_update(&mut t, &b, 0.0).unwrap();
        assert_eq!(t, a);

        let zero = constant_critic(2, 0.0);
        let two = constant_critic(2, 2.0);
        let mut t = zero.clone();
        soft_update(&mut t, &two, 0.5).unwrap();
        assert_eq!(t.layers()[1].bias[0], 1.0);

        let other = small_agent(1).critic;
        assert!(soft_update(&mut t, &other, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn soft_update_trails_between(seed_a in 0u64..1000, seed_b in 0u64..1000, tau in 0.0f64..=1.0) {
            let old = small_agent(seed_a).actor;
            let src = small_agent(seed_b).actor;
            let mut t = old.clone();
            soft_update(&mut t, &src, tau).unwrap();
            for ((n, o), s) in t.tensors().zip(old.tensors()).zip(src.tensors()) {
                for ((&n, &o), &s) in n.iter().zip(o).zip(s) {
                    prop_assert!(n >= o.min(s) && n <= o.max(s));
                }
            }
        }

        #[test]
        fn bellman_target_is_linear_in_reward(r in -10.0f64..10.0, delta in -5.0f64..5.0) {
            let agent = small_agent(3);
            let t0 = transition(r, false);
            let t1 = transition(r + delta, false);
            let y0 = bellman_target(&t0, &agent.actor, &agent.critic, 0.96).unwrap();
            let y1 = bellman_target(&t1, &agent.actor, &agent.critic, 0.96).unwrap();
            prop_assert!(((y1 - y0) - ((r + delta) - r)).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_critic_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = small_agent(5);
        agent.critic = constant_critic(3, 1.5);
        agent.target_critic = agent.critic.clone();
        agent.critic_opt = AdamState::new(&agent.critic);
        let mut buffer = ReplayBuffer::new(64, 2, 1).unwrap();
        for i in 0..16 {
            let mut t = transition(1.5, true);
            t.state[0] = i as f64 * 0.05;
            buffer.store(t).unwrap();
        }
        let hp = DdpgHyperparameters {
            batch_size: 8,
            ..Default::default()
        };
        let before = agent.critic.clone();
        let stats = ddpg_train_step(&mut agent, &buffer, &hp, &mut rng).unwrap();
        assert_eq!(stats.critic_loss, 0.0);
        assert_eq!(agent.critic, before);
    }

    #[test]
    fn insufficient_buffer_is_signalled() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = small_agent(5);
        let buffer = ReplayBuffer::new(64, 2, 1).unwrap();
        let hp = DdpgHyperparameters::default();
        let before = agent.actor.clone();
        assert!(matches!(
            ddpg_train_step(&mut agent, &buffer, &hp, &mut rng),
            Err(DdpgError::InsufficientSamples {
                available: 0,
                required: 128
            })
        ));
        assert_eq!(agent.actor, before);
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = NetworkConfig {
            actor_hidden: vec![6, 5],
            critic_hidden: vec![7],
            actor_final_scale: 1.0,
            ..Default::default()
        };
        let actor = net.build_actor(3, 2, &mut rng).unwrap();
        let critics = vec![
            net.build_critic(3, 2, &mut rng).unwrap(),
            net.build_critic(3, 2, &mut rng).unwrap(),
        ];
        let states = Array2::from_shape_fn((5, 3), |(i, j)| ((i * 3 + j) as f64 * 0.61).cos());
        let (_, grads) = actor_objective_gradient(&actor, &critics, states.view()).unwrap();

        let objective = |a: &MlpParameters| {
            actor_objective_gradient(a, &critics, states.view())
                .unwrap()
                .0
        };
        let h = 1e-5;
        let mut probe = actor.clone();
        let mut worst = 0.0f64;
        let analytic: Vec<Vec<f64>> = grads.tensors().map(<[f64]>::to_vec).collect();
        for (k, tensor) in analytic.iter().enumerate() {
            for (i, &a) in tensor.iter().enumerate() {
                let orig = probe.tensors_mut().nth(k).unwrap()[i];
                probe.tensors_mut().nth(k).unwrap()[i] = orig + h;
                let plus = objective(&probe);
                probe.tensors_mut().nth(k).unwrap()[i] = orig - h;
                let minus = objective(&probe);
                probe.tensors_mut().nth(k).unwrap()[i] = orig;
                let fd = (plus - minus) / (2.0 * h);
                worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(RELATIVE_ERROR_FLOOR));
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut agent = small_agent(8);
            let mut buffer = ReplayBuffer::new(256, 2, 1).unwrap();
            for i in 0..64 {
                let x = i as f64 * 0.1;
                buffer
                    .store(Transition {
                        state: vec![x.sin(), x.cos()],
                        action: vec![(x * 3.0).sin()],
                        reward: x.cos(),
                        next_state: vec![(x + 0.1).sin(), (x + 0.1).cos()],
                        terminal: i % 10 == 9,
                        worker: 0,
                    })
                    .unwrap();
            }
            let hp = DdpgHyperparameters {
                batch_size: 16,
                ..Default::default()
            };
            (0..20)
                .map(|_| {
                    let s = ddpg_train_step(&mut agent, &buffer, &hp, &mut rng).unwrap();
                    (s.critic_loss.to_bits(), s.actor_objective.to_bits())
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        for hp in [
            DdpgHyperparameters {
                gamma: 1.0,
                ..Default::default()
            },
            DdpgHyperparameters {
                tau: 0.0,
                ..Default::default()
            },
            DdpgHyperparameters {
                batch_size: 0,
                ..Default::default()
            },
        ] {
            assert!(hp.validate().is_err());
        }
        assert!(DdpgHyperparameters::default().validate().is_ok());
    }
}
