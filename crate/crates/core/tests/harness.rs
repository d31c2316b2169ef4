use std::fs;
use std::path::Path;

use ace_rl::harness::{
    actor_file, cmd_ablate_activation, cmd_ablate_workers, cmd_evaluate, cmd_train, critic_file,
    rewards_file, summary_file, trajectory_file, EnsembleLabel, ExperimentConfig, HarnessError,
    CONFIG_ECHO_FILE, CURVE_FILE,
};
use ace_rl::numerics::{checkpoint_load, checkpoint_save, Activation, MlpParameters};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config(extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
        seed = 3
        [environment]
        name = "pendulum"
        episode_cap = 40
        [network]
        actor_hidden = [8]
        critic_hidden = [8]
        [hyperparameters]
        batch_size = 16
        warmup_steps = 40
        [training]
        total_steps = 120
        snapshot_refresh_interval = 25
        [evaluation]
        episodes = 3
        {extra}
        "#
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn identical_single_worker_runs_give_identical_files() {
    let cfg = small_config("");
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_train(&cfg, &a).unwrap();
    cmd_train(&cfg, &b).unwrap();
    for f in [
        CURVE_FILE,
        CONFIG_ECHO_FILE,
        &actor_file(0),
        &critic_file(0),
    ] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let label = EnsembleLabel::BASELINE;
    cmd_evaluate(&cfg, &a, label, 3, None).unwrap();
    cmd_evaluate(&cfg, &b, label, 3, None).unwrap();
    for f in [summary_file(label), rewards_file(label)] {
        assert_eq!(read(&a.join(&f)), read(&b.join(&f)), "{f}");
    }
    let curve = read(&a.join(CURVE_FILE));
    assert!(
        curve.starts_with("member,worker,episode,total_reward,steps,env_steps,fell,timed_out\n")
    );
    // 120 steps of 10-step episodes.
    assert_eq!(curve.lines().count(), 1 + 12);
}

#[test]
fn seed_change_changes_the_run() {
    let cfg = small_config("");
    let mut other = cfg.clone();
    other.seed += 1;
    let dir = tempfile::tempdir().unwrap();
    let a = cmd_train(&cfg, &dir.path().join("a")).unwrap();
    let b = cmd_train(&other, &dir.path().join("b")).unwrap();
    assert_ne!(a.actors, b.actors);
}

#[test]
fn zero_steps_keeps_initial_networks() {
    let mut cfg = small_config("");
    cfg.training.total_steps = 0;
    cfg.training.checkpoint_interval = Some(10);
    let dir = tempfile::tempdir().unwrap();
    let run = cmd_train(&cfg, dir.path()).unwrap();
    assert!(run.curve.is_empty());
    assert!(!dir.path().join("checkpoints").exists());
    let actor = checkpoint_load(&dir.path().join(actor_file(0))).unwrap();
    assert_eq!(actor, run.actors[0]);
    let mut trained = cfg.clone();
    trained.training.total_steps = 100;
    let later = cmd_train(&trained, &dir.path().join("t")).unwrap();
    assert_ne!(later.actors[0], actor);
}

#[test]
fn periodic_checkpoints_are_written() {
    let mut cfg = small_config("");
    cfg.training.checkpoint_interval = Some(50);
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&cfg, dir.path()).unwrap();
    for step in [50, 100] {
        let d = dir.path().join("checkpoints").join(format!("step-{step}"));
        assert!(d.join(actor_file(0)).exists() && d.join(critic_file(0)).exists());
    }
}

#[test]
fn ten_actors_with_two_critics_are_rejected() {
    let text = "[ensemble]\nactors = 10\ncritics = 2\nmode = \"joint\"";
    match ExperimentConfig::from_toml(text) {
        Err(HarnessError::Config { field, .. }) => assert_eq!(field, "ensemble.critics"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn evaluation_reports_are_consistent_and_pure() {
    let cfg = small_config("[ensemble]\nactors = 3\ncritics = 3\nmembers = [{ noise_sigma = 0.1 }, {}, { actor_hidden = [6] }]");
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&cfg, dir.path()).unwrap();
    let before: Vec<String> = (0..3)
        .map(|i| read(&dir.path().join(actor_file(i))))
        .collect();

    for label in ["A1C0", "A3C1", "A3C3"] {
        let label: EnsembleLabel = label.parse().unwrap();
        let report = cmd_evaluate(&cfg, dir.path(), label, 4, None).unwrap();
        assert_eq!(report.label, label.to_string());
        assert_eq!(report.rewards.len(), 4);
        let raw = read(&dir.path().join(rewards_file(label)));
        let rewards: Vec<f64> = raw
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(rewards, report.rewards);
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        assert!((mean - report.average_reward).abs() < 1e-9);
        assert_eq!(
            rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            report.max_reward
        );
        let falls = rewards
            .iter()
            .zip(&report.fell)
            .filter(|(r, f)| **f || **r < report.fall_reward_threshold)
            .count();
        assert_eq!(falls, report.fall_count);
    }
    let after: Vec<String> = (0..3)
        .map(|i| read(&dir.path().join(actor_file(i))))
        .collect();
    assert_eq!(before, after);

    let one = cmd_evaluate(&cfg, dir.path(), "A3C3".parse().unwrap(), 1, None).unwrap();
    assert_eq!(one.average_reward, one.max_reward);
}

#[test]
fn missing_members_and_mismatched_dims_are_rejected() {
    let cfg = small_config("");
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&cfg, dir.path()).unwrap();
    assert!(matches!(
        cmd_evaluate(&cfg, dir.path(), "A2C2".parse().unwrap(), 2, None),
        Err(HarnessError::MissingCheckpoint(_))
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let odd = MlpParameters::init(
        &[5, 8, 1],
        Activation::Selu,
        Activation::Tanh,
        1.0,
        &mut rng,
    )
    .unwrap();
    checkpoint_save(&odd, &dir.path().join(actor_file(1))).unwrap();
    fs::copy(
        dir.path().join(critic_file(0)),
        dir.path().join(critic_file(1)),
    )
    .unwrap();
    let err = cmd_evaluate(&cfg, dir.path(), "A2C2".parse().unwrap(), 2, None).unwrap_err();
    assert!(err.to_string().contains("actor 1"), "{err}");
}

#[test]
fn trajectories_carry_critic_scores() {
    let cfg = small_config("trajectory_episodes = 1\n[ensemble]\nactors = 2\ncritics = 2");
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&cfg, dir.path()).unwrap();
    let label: EnsembleLabel = "A2C2".parse().unwrap();
    cmd_evaluate(&cfg, dir.path(), label, 2, None).unwrap();
    let dump = read(&dir.path().join(trajectory_file(label)));
    let mut lines = dump.lines();
    assert_eq!(
        lines.next().unwrap(),
        "episode,step,observation,action,reward,terminal,fell,critic_scores,chosen_index"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.starts_with("0,")));
    assert!(rows
        .iter()
        .all(|r| r.split(',').nth(7).unwrap().split(';').count() == 2));
}

#[test]
fn joint_training_writes_every_member() {
    let cfg = small_config("[ensemble]\nactors = 3\ncritics = 1\nmode = \"joint\"");
    let dir = tempfile::tempdir().unwrap();
    let run = cmd_train(&cfg, dir.path()).unwrap();
    assert_eq!((run.actors.len(), run.critics.len()), (3, 1));
    for i in 0..3 {
        assert!(dir.path().join(actor_file(i)).exists());
    }
    assert!(!dir.path().join(critic_file(1)).exists());
    let report = cmd_evaluate(&cfg, dir.path(), "A3C1".parse().unwrap(), 2, None).unwrap();
    assert_eq!(report.label, "A3C1");
}

#[test]
fn single_kind_ablation_matches_plain_training() {
    let cfg = small_config("");
    let dir = tempfile::tempdir().unwrap();
    let runs = cmd_ablate_activation(&cfg, &[Activation::Selu], &dir.path().join("ab")).unwrap();
    let plain = cmd_train(&cfg, &dir.path().join("plain")).unwrap();
    assert_eq!(runs.len(), 1);
    let stats =
        |c: &[ace_rl::harness::CurveRow]| c.iter().map(|r| r.stats.clone()).collect::<Vec<_>>();
    assert_eq!(stats(&runs[0].curve), stats(&plain.curve));
    assert_eq!(
        read(&dir.path().join("ab/selu").join(CURVE_FILE)),
        read(&dir.path().join("plain").join(CURVE_FILE))
    );
    assert!(cmd_ablate_activation(&cfg, &[], &dir.path().join("none")).is_err());
}

#[test]
fn activation_is_the_only_controlled_difference() {
    let cfg = small_config("");
    let dir = tempfile::tempdir().unwrap();
    let runs =
        cmd_ablate_activation(&cfg, &[Activation::Selu, Activation::Relu], dir.path()).unwrap();
    let selu = cmd_train(&cfg, &dir.path().join("x")).unwrap();
    let mut relu_cfg = cfg.clone();
    relu_cfg.network.hidden_activation = Activation::Relu;
    let relu = cmd_train(&relu_cfg, &dir.path().join("y")).unwrap();
    let stats =
        |c: &[ace_rl::harness::CurveRow]| c.iter().map(|r| r.stats.clone()).collect::<Vec<_>>();
    assert_eq!(stats(&runs[1].curve), stats(&relu.curve));
    assert_eq!(stats(&runs[0].curve), stats(&selu.curve));
    assert_ne!(selu.actors[0], relu.actors[0]);
    // Same seed, so the initial weight draws coincide.
    let zero = |c: &ExperimentConfig, d: &str| {
        let mut c = c.clone();
        c.training.total_steps = 0;
        cmd_train(&c, &dir.path().join(d)).unwrap().actors[0].clone()
    };
    let (a, b) = (zero(&cfg, "z1"), zero(&relu_cfg, "z2"));
    assert_eq!(a.layers(), b.layers());
    let summary = read(&dir.path().join("ablation.csv"));
    assert!(summary
        .starts_with("variant,label,episodes,average_reward,max_reward,fall_count\nselu,A1C0,3,"));
    assert!(summary.contains("\nrelu,A1C0,3,"));
}

#[test]
fn worker_ablation_collects_the_full_budget() {
    let cfg = small_config("");
    let dir = tempfile::tempdir().unwrap();
    let runs = cmd_ablate_workers(&cfg, &[1, 3], dir.path()).unwrap();
    assert_eq!(runs.len(), 2);
    for r in &runs {
        let steps: usize = r.curve.iter().map(|c| c.stats.steps).sum();
        assert!(steps <= cfg.training.total_steps);
        assert!(r.curve.iter().all(|c| c.stats.worker < 3));
    }
    let three = &runs[1].curve;
    assert!(
        three.len() >= 9,
        "three workers finish at least nine 10-step episodes of 120 steps"
    );
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 2);
}

#[test]
fn readme_config_sketch_parses() {
    let readme = read(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md"));
    let block = readme
        .split("```toml\n")
        .nth(1)
        .unwrap()
        .split("```")
        .next()
        .unwrap();
    let cfg = ExperimentConfig::from_toml(block).unwrap();
    assert_eq!(cfg.label(), "A10C10");
}
