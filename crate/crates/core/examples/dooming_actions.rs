//! Finds states on the obstacle runner where leaning forward is a dooming
//! action (every continuation falls) while straightening up is not.

use ace_rl::envs::{ObstacleRunner, ObstacleRunnerConfig, RunnerState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut runner = ObstacleRunner::new(ObstacleRunnerConfig::default())?;
    let grid = [-1.0, 0.0, 1.0];
    runner.set_obstacles(vec![12.0, 40.0]);
    println!("gap   posture  lean+1   upright  lean-1");
    for gap in [0.3, 0.6, 0.9, 1.5, 3.0] {
        for posture in [0.0, 0.5, 1.0] {
            runner.set_state(RunnerState {
                position: 12.0 - gap,
                velocity: 6.0,
                posture,
                unstable: false,
                collapse_counter: 0,
                steps: 0,
                done: false,
            });
            let verdict = |a: f64| -> Result<&str, Box<dyn std::error::Error>> {
                Ok(if runner.is_dooming_action(a, &grid)? {
                    "dooming"
                } else {
                    "ok"
                })
            };
            println!(
                "{gap:<5} {posture:<8} {:<8} {:<8} {}",
                verdict(1.0)?,
                verdict(0.0)?,
                verdict(-1.0)?
            );
        }
    }
    Ok(())
}
