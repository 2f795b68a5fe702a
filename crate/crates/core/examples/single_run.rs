//! Design one controller with the stock protocol and report its test errors.
//!
//! ```text
//! cargo run --release --example single_run -- <master_seed> <run>
//! ```

use std::time::Instant;

use bnrobot::harness::{run_single, ExperimentConfig};

fn main() -> bnrobot::Result<()> {
    let mut args = std::env::args().skip(1);
    let master_seed = args.next().map_or(1, |s| s.parse().expect("master seed"));
    let run = args.next().map_or(0, |s| s.parse().expect("run index"));
    let cfg = ExperimentConfig {
        master_seed,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let s = run_single(&cfg, run, &mut |r| {
        if r.iteration % 2500 == 0 {
            eprintln!(
                "iter {:>5} {:?} incumbent {:.4}",
                r.iteration, r.stage, r.incumbent_error
            );
        }
    })?;
    let secs = start.elapsed().as_secs_f64();
    println!(
        "run {} train {:.4} (median {:.4}) test median {:.4} [{:.4}, {:.4}] accepted {}",
        s.run,
        s.training_error,
        s.train.median,
        s.test.median,
        s.test.q1,
        s.test.q3,
        s.accepted_moves
    );
    println!(
        "{:.1}s, neutral {} complete {} pruned {}, {:.2e} steps/s",
        secs,
        s.stats.neutral,
        s.stats.complete,
        s.stats.pruned,
        s.stats.simulated_steps as f64 / secs
    );
    Ok(())
}
