//! Same seed, same budget, one training run per hidden activation on the
//! pendulum; prints the final evaluation return of each.

use ace_rl::harness::{cmd_ablate_activation, ExperimentConfig};
use ace_rl::numerics::Activation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        seed = 2
        [environment]
        name = "pendulum"
        [network]
        actor_hidden = [32, 32]
        critic_hidden = [32, 32]
        [hyperparameters]
        batch_size = 64
        [training]
        total_steps = 6000
        [evaluation]
        episodes = 10
        "#,
    )?;
    let out = std::env::temp_dir()
        .join("ace-rl-examples")
        .join("activation-ablation");
    for run in cmd_ablate_activation(&cfg, &Activation::HIDDEN_KINDS, &out)? {
        println!(
            "{:<10} average return {:.1}",
            run.variant.as_str(),
            run.report.average_reward
        );
    }
    println!("curves in {}", out.join("curves.csv").display());
    Ok(())
}
