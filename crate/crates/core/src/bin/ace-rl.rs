use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use ace_rl::harness::{
    cmd_ablate_activation, cmd_ablate_workers, cmd_evaluate, cmd_train, EnsembleLabel,
    ExperimentConfig, HarnessError,
};
use ace_rl::numerics::Activation;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Train and evaluate DDPG actor-critic ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); defaults apply to anything left out.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Replaces the config's seed.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Directory that receives the run directory.
    #[arg(short, long, default_value = "runs")]
    output: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured ensemble.
    Train(Common),
    /// Evaluate an AXCY ensemble from a training run directory.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Run directory holding actor_i.ckpt and critic_i.ckpt.
        #[arg(long)]
        run: PathBuf,
        /// Ensemble label such as A1C0, A10C1 or A10C10.
        #[arg(long)]
        label: EnsembleLabel,
        /// Overrides evaluation.episodes.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// One run per hidden activation.
    AblateActivation {
        #[command(flatten)]
        common: Common,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "selu,relu,leaky_relu,tanh,sigmoid"
        )]
        kinds: Vec<Activation>,
    },
    /// One run per rollout worker count.
    AblateWorkers {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        counts: Vec<usize>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_dir(output: &Path, name: &str) -> PathBuf {
    let stamp = humantime::format_rfc3339_seconds(SystemTime::now())
        .to_string()
        .replace(':', "");
    output.join(format!("{stamp}-{name}"))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train(common) => {
            let cfg = load_config(&common)?;
            let dir = run_dir(&common.output, &cfg.label());
            let summary = cmd_train(&cfg, &dir)?;
            println!(
                "{} episodes, checkpoints in {}",
                summary.curve.len(),
                dir.display()
            );
        }
        Command::Evaluate {
            common,
            run,
            label,
            episodes,
        } => {
            let cfg = load_config(&common)?;
            let episodes = episodes.unwrap_or(cfg.evaluation.episodes);
            let r = cmd_evaluate(&cfg, &run, label, episodes, Some(&common.output))?;
            println!("label,episodes,average_reward,max_reward,fall_count");
            println!(
                "{},{},{},{},{}",
                r.label,
                r.episodes(),
                r.average_reward,
                r.max_reward,
                r.fall_count
            );
        }
        Command::AblateActivation { common, kinds } => {
            let cfg = load_config(&common)?;
            let dir = run_dir(&common.output, "ablate-activation");
            for r in cmd_ablate_activation(&cfg, &kinds, &dir)? {
                println!(
                    "{}: average {} falls {}",
                    r.variant, r.report.average_reward, r.report.fall_count
                );
            }
        }
        Command::AblateWorkers { common, counts } => {
            let cfg = load_config(&common)?;
            let dir = run_dir(&common.output, "ablate-workers");
            for r in cmd_ablate_workers(&cfg, &counts, &dir)? {
                println!(
                    "{}: average {} falls {}",
                    r.variant, r.report.average_reward, r.report.fall_count
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
