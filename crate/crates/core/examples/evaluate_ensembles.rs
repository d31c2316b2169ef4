//! Trains three independent actor-critic pairs through the harness, then
//! evaluates the A1C0, A3C1 and A3C3 combinations on the same episodes.

use ace_rl::harness::{cmd_evaluate, cmd_train, EnsembleLabel, ExperimentConfig};

const CONFIG: &str = r#"
seed = 4
[environment]
name = "obstacle-runner"
[network]
actor_hidden = [32, 32]
critic_hidden = [32, 32]
[hyperparameters]
batch_size = 64
[training]
total_steps = 8000
[ensemble]
actors = 3
critics = 3
members = [{ noise_sigma = 0.1 }, { noise_sigma = 0.2 }, { noise_sigma = 0.3, actor_hidden = [48, 32] }]
[evaluation]
episodes = 20
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let run = std::env::temp_dir()
        .join("ace-rl-examples")
        .join("evaluate-ensembles");
    cmd_train(&cfg, &run)?;
    println!("label  average  max      falls");
    for label in ["A1C0", "A3C1", "A3C3"] {
        let label: EnsembleLabel = label.parse()?;
        let r = cmd_evaluate(&cfg, &run, label, cfg.evaluation.episodes, None)?;
        println!(
            "{:<6} {:<8.1} {:<8.1} {}",
            r.label, r.average_reward, r.max_reward, r.fall_count
        );
    }
    println!("reports written to {}", run.display());
    Ok(())
}
