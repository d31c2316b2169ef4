use ndarray::{Array1, ArrayView2};
use rand::Rng;

use super::ensemble::{argmax_first, mean_critic_batch, score_action, EnsemblePolicy};
use super::AceError;
use crate::ddpg::{
    actor_ascent_step, critic_input, critic_regression_step, discounted, soft_update, Batch,
    DdpgAgent, DdpgHyperparameters, NetworkConfig, ReplayBuffer, Transition,
};
use crate::numerics::{AdamState, MlpParameters};

/// `y = r + gamma (1 - d) max_j Q(s', mu_j(s'))` for one transition, with
/// `Q` supplied by the caller (usually the mean target critic).
pub fn ace_bellman_target<F>(
    t: &Transition,
    target_actors: &[MlpParameters],
    target_critic: F,
    gamma: f64,
) -> Result<f64, AceError>
where
    F: Fn(&[f64], &[f64]) -> Result<f64, AceError>,
{
    let mut scores = Vec::with_capacity(target_actors.len());
    for actor in target_actors {
        let a = actor.predict(&t.next_state)?;
        scores.push(target_critic(&t.next_state, &a)?);
    }
    let best = argmax_first(&scores).ok_or(AceError::NoActors)?;
    Ok(discounted(t.reward, t.terminal, gamma, scores[best]))
}

/// [`ace_bellman_target`] with the mean of `target_critics` as `Q`.
pub fn ace_bellman_target_mean(
    t: &Transition,
    target_actors: &[MlpParameters],
    target_critics: &[MlpParameters],
    gamma: f64,
) -> Result<f64, AceError> {
    ace_bellman_target(
        t,
        target_actors,
        |s, a| score_action(target_critics, s, a),
        gamma,
    )
}

/// Batched ensemble Bellman targets.
pub fn ace_targets_batch(
    next_states: ArrayView2<'_, f64>,
    rewards: &Array1<f64>,
    terminals: &[bool],
    target_actors: &[MlpParameters],
    target_critics: &[MlpParameters],
    gamma: f64,
) -> Result<Array1<f64>, AceError> {
    let mut best: Option<Array1<f64>> = None;
    for actor in target_actors {
        let actions = actor.predict_batch(next_states)?;
        let q = mean_critic_batch(
            target_critics,
            critic_input(next_states, actions.view()).view(),
        )?;
        best = Some(match best {
            None => q,
            Some(mut b) => {
                b.zip_mut_with(&q, |b, &q| {
                    if q > *b {
                        *b = q;
                    }
                });
                b
            }
        });
    }
    let best = best.ok_or(AceError::NoActors)?;
    Ok(rewards
        .iter()
        .zip(terminals)
        .zip(&best)
        .map(|((&r, &d), &q)| discounted(r, d, gamma, q))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AceTrainStats {
    pub critic_losses: Vec<f64>,
    pub actor_objectives: Vec<f64>,
}

/// Actors and a shared critic ensemble trained together on one replay
/// buffer.
#[derive(Clone, Debug)]
pub struct EnsembleTrainer {
    pub actors: Vec<MlpParameters>,
    pub target_actors: Vec<MlpParameters>,
    pub actor_opts: Vec<AdamState>,
    pub critics: Vec<MlpParameters>,
    pub target_critics: Vec<MlpParameters>,
    pub critic_opts: Vec<AdamState>,
}

impl EnsembleTrainer {
    pub fn new(actors: Vec<MlpParameters>, critics: Vec<MlpParameters>) -> Result<Self, AceError> {
        if critics.is_empty() {
            return Err(AceError::NoCritics);
        }
        // Reuse the shape checks of the inference ensemble.
        EnsemblePolicy::new(actors.clone(), critics.clone())?;
        Ok(Self {
            target_actors: actors.clone(),
            actor_opts: actors.iter().map(AdamState::new).collect(),
            target_critics: critics.clone(),
            critic_opts: critics.iter().map(AdamState::new).collect(),
            actors,
            critics,
        })
    }

    /// Fresh networks drawn in the order actor 0..N, then critic 0..M.
    pub fn init<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        actor_count: usize,
        critic_count: usize,
        net: &NetworkConfig,
        rng: &mut R,
    ) -> Result<Self, AceError> {
        let actors = (0..actor_count)
            .map(|_| net.build_actor(state_dim, action_dim, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let critics = (0..critic_count)
            .map(|_| net.build_critic(state_dim, action_dim, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(actors, critics)
    }

    /// Takes over the networks, targets and optimizer state of one agent.
    pub fn from_agent(agent: DdpgAgent) -> Self {
        Self {
            actors: vec![agent.actor],
            target_actors: vec![agent.target_actor],
            actor_opts: vec![agent.actor_opt],
            critics: vec![agent.critic],
            target_critics: vec![agent.target_critic],
            critic_opts: vec![agent.critic_opt],
        }
    }

    /// Inference ensemble over the online networks.
    pub fn policy(&self) -> EnsemblePolicy {
        EnsemblePolicy::new(self.actors.clone(), self.critics.clone())
            .expect("validated at construction")
    }

    pub fn label(&self) -> String {
        format!("A{}C{}", self.actors.len(), self.critics.len())
    }
}

/// Every critic regresses to the shared ensemble target, every actor
/// ascends the updated mean critic, then all targets track softly.
pub fn ace_train_step<R: Rng + ?Sized>(
    trainer: &mut EnsembleTrainer,
    buffer: &ReplayBuffer,
    hp: &DdpgHyperparameters,
    rng: &mut R,
) -> Result<AceTrainStats, AceError> {
    if buffer.len() < hp.batch_size {
        return Err(crate::ddpg::DdpgError::InsufficientSamples {
            available: buffer.len(),
            required: hp.batch_size,
        }
        .into());
    }
    let batch = buffer.sample_batch(hp.batch_size, rng)?;
    ace_train_on_batch(trainer, &batch, hp)
}

/// [`ace_train_step`] on an already sampled batch.
pub fn ace_train_on_batch(
    trainer: &mut EnsembleTrainer,
    batch: &Batch,
    hp: &DdpgHyperparameters,
) -> Result<AceTrainStats, AceError> {
    let targets = ace_targets_batch(
        batch.next_states.view(),
        &batch.rewards,
        &batch.terminals,
        &trainer.target_actors,
        &trainer.target_critics,
        hp.gamma,
    )?;
    let inputs = critic_input(batch.states.view(), batch.actions.view());
    let mut critic_losses = Vec::with_capacity(trainer.critics.len());
    for (critic, opt) in trainer.critics.iter_mut().zip(&mut trainer.critic_opts) {
        critic_losses.push(critic_regression_step(
            critic,
            opt,
            hp.critic_lr,
            inputs.view(),
            &targets,
        )?);
    }
    let mut actor_objectives = Vec::with_capacity(trainer.actors.len());
    for (actor, opt) in trainer.actors.iter_mut().zip(&mut trainer.actor_opts) {
        actor_objectives.push(actor_ascent_step(
            actor,
            opt,
            hp.actor_lr,
            &trainer.critics,
            batch.states.view(),
        )?);
    }
    for (t, c) in trainer.target_critics.iter_mut().zip(&trainer.critics) {
        soft_update(t, c, hp.tau)?;
    }
    for (t, a) in trainer.target_actors.iter_mut().zip(&trainer.actors) {
        soft_update(t, a, hp.tau)?;
    }
    Ok(AceTrainStats {
        critic_losses,
        actor_objectives,
    })
}
