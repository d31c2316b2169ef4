//! Three actors trained jointly against a shared ensemble of three critics.
//! Bellman targets bootstrap from the best proposal under the mean target
//! critic.

use ace_rl::ace::{ace_train_step, EnsembleTrainer};
use ace_rl::ddpg::{DdpgHyperparameters, NetworkConfig, ReplayBuffer, Transition};
use ace_rl::envs::{Pendulum, PendulumConfig, Pipeline, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hp = DdpgHyperparameters {
        batch_size: 64,
        ..DdpgHyperparameters::default()
    };
    let net = NetworkConfig {
        actor_hidden: vec![32, 32],
        critic_hidden: vec![32, 32],
        ..NetworkConfig::default()
    };
    let mut env = Pipeline::new(
        Pendulum::new(PendulumConfig::default())?,
        PipelineConfig::default(),
    )?;
    let (sd, ad) = (env.state_dim(), env.action_dim());
    let mut trainer = EnsembleTrainer::init(sd, ad, 3, 3, &net, &mut rng)?;
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity, sd, ad)?;

    let mut episode = 0;
    let mut state = env.reset(episode);
    let mut episode_return = 0.0;
    for step in 0..6_000 {
        let action: Vec<f64> = if step < hp.warmup_steps {
            vec![rng.random_range(-1.0..=1.0)]
        } else {
            let (a, _) = trainer.policy().select_action(&state)?;
            a.iter()
                .map(|v| (v + rng.random_range(-0.2..0.2)).clamp(-1.0, 1.0))
                .collect()
        };
        let r = env.step(&action)?;
        episode_return += r.reward;
        buffer.store(Transition {
            state: state.clone(),
            action,
            reward: r.reward,
            next_state: r.observation.clone(),
            terminal: r.bootstrap_terminal(),
            worker: 0,
        })?;
        if step >= hp.warmup_steps {
            let stats = ace_train_step(&mut trainer, &buffer, &hp, &mut rng)?;
            if step % 1000 == 0 {
                println!("step {step}: critic losses {:.3?}", stats.critic_losses);
            }
        }
        state = r.observation;
        if r.terminal {
            println!(
                "{} episode {episode}: return {episode_return:.1}",
                trainer.label()
            );
            episode += 1;
            episode_return = 0.0;
            state = env.reset(episode);
        }
    }
    Ok(())
}
