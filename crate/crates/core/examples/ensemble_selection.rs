//! Actor-critic ensemble inference: every actor proposes, the mean critic
//! scores each proposal, the best-scored proposal is executed.

use ace_rl::ace::EnsemblePolicy;
use ace_rl::ddpg::NetworkConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = NetworkConfig {
        actor_final_scale: 1.0,
        ..NetworkConfig::default()
    };
    let (sd, ad) = (6, 2);
    let actors = (0..4)
        .map(|_| net.build_actor(sd, ad, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let critics = (0..4)
        .map(|_| net.build_critic(sd, ad, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let state = [0.2, -0.4, 0.9, 0.0, -0.1, 0.5];

    for m in [1, 4] {
        let policy = EnsemblePolicy::new(actors.clone(), critics[..m].to_vec())?;
        let (action, trace) = policy.select_action(&state)?;
        println!("{}:", policy.label());
        for (i, (a, s)) in trace.proposed_actions.iter().zip(&trace.scores).enumerate() {
            let mark = if i == trace.chosen_index { "*" } else { " " };
            println!(
                "  {mark} actor {i} proposes [{:+.3}, {:+.3}] score {s:+.4}",
                a[0], a[1]
            );
        }
        println!("  executes [{:+.3}, {:+.3}]", action[0], action[1]);
    }

    let single = EnsemblePolicy::new(actors[..1].to_vec(), vec![])?;
    let (action, _) = single.select_action(&state)?;
    println!(
        "{} passes actor 0 through: [{:+.3}, {:+.3}]",
        single.label(),
        action[0],
        action[1]
    );
    Ok(())
}
