//! Plain DDPG on the pendulum swing-up, written as an explicit loop over
//! the library pieces: pipeline, OU noise, replay buffer and train step.

use ace_rl::ddpg::{
    ddpg_train_step, DdpgAgent, DdpgHyperparameters, NetworkConfig, OuNoise, ReplayBuffer,
    Transition,
};
use ace_rl::envs::{Pendulum, PendulumConfig, Pipeline, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEPS: usize = 12_000;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let hp = DdpgHyperparameters::default();
    let mut env = Pipeline::new(
        Pendulum::new(PendulumConfig::default())?,
        PipelineConfig::default(),
    )?;
    let (sd, ad) = (env.state_dim(), env.action_dim());
    let mut agent = DdpgAgent::new(sd, ad, &NetworkConfig::default(), &mut rng)?;
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity, sd, ad)?;
    let mut noise = OuNoise::new(ad, hp.noise);

    let mut episode = 0u64;
    let mut state = env.reset(episode);
    let mut episode_return = 0.0;
    for step in 0..STEPS {
        let action: Vec<f64> = if step < hp.warmup_steps {
            (0..ad).map(|_| rng.random_range(-1.0..=1.0)).collect()
        } else {
            let greedy = agent.act(&state)?;
            let n = noise.step(&mut rng);
            greedy
                .iter()
                .zip(n)
                .map(|(a, e)| (a + e).clamp(-1.0, 1.0))
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
            ddpg_train_step(&mut agent, &buffer, &hp, &mut rng)?;
        }
        state = r.observation;
        if r.terminal {
            if episode.is_multiple_of(10) {
                println!("episode {episode:>3}  return {episode_return:>8.1}");
            }
            episode += 1;
            episode_return = 0.0;
            noise.reset();
            state = env.reset(episode);
        }
    }
    Ok(())
}
