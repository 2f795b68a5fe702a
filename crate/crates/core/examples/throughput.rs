//! Closed-loop simulation throughput for random controllers.

use std::time::Instant;

use bnrobot::arena::{ArenaConfig, Stage, TrialSpec};
use bnrobot::coupling::random_controller_network;
use bnrobot::episode::run_episode;
use bnrobot::Controller;

fn main() -> bnrobot::Result<()> {
    let arena = ArenaConfig::default();
    let trials: Vec<TrialSpec> = (0..30)
        .map(|i| TrialSpec::generate(i, Stage::Full, 1000, (500, 650), &arena))
        .collect();
    let nets: Vec<_> = (0..50)
        .map(|s| random_controller_network(20, 3, s))
        .collect::<bnrobot::Result<_>>()?;
    let start = Instant::now();
    let mut steps = 0u64;
    let mut acc = 0.0;
    for net in &nets {
        let ctl = Controller::new(net)?;
        for t in &trials {
            if let bnrobot::episode::Outcome::Complete(r) =
                run_episode(&ctl, t, &arena, 0.5, f64::INFINITY, &mut ())?
            {
                acc += r.error;
            }
            steps += t.horizon as u64;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    println!(
        "{steps} steps in {secs:.2}s: {:.2e} steps/s (checksum {acc:.6})",
        steps as f64 / secs
    );
    Ok(())
}
