//! Closed-loop simulation of one trial: sense, update the network, act.

use std::io::Write;

use crate::arena::{
    apply_command, apply_perturbation, light_sector, sound_value, step_label, ArenaConfig,
    RobotPose, Stage, StepLabel, TrialSpec, WheelCommand,
};
use crate::coupling::{Controller, SensorFrame};
use crate::error::Result;
use crate::objective::{report_from_counts, ErrorReport, TrialTrace};

/// Everything that happened during step `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// Pose after the step's command was applied.
    pub pose: RobotPose,
    pub sector: u8,
    pub sound: bool,
    pub command: WheelCommand,
    /// Distance from the robot centre to the light after the step.
    pub distance: f64,
    pub label: StepLabel,
    /// Packed network state after the update.
    pub state: u64,
}

/// Hooks called from inside the simulation loop.
pub trait Observer {
    /// Whether [`lookup`](Observer::lookup) should be called at all.
    const LOOKUPS: bool = false;
    /// Whether [`step`](Observer::step) should be called at all.
    const STEPS: bool = false;

    #[inline]
    fn lookup(&mut self, _node: usize, _row: usize) {}

    #[inline]
    fn step(&mut self, _record: &StepRecord) {}
}

impl Observer for () {}

/// Collects every step record.
#[derive(Default, Debug, Clone)]
pub struct Recorder {
    pub steps: Vec<StepRecord>,
}

impl Observer for Recorder {
    const STEPS: bool = true;

    fn step(&mut self, record: &StepRecord) {
        self.steps.push(*record);
    }
}

impl Recorder {
    pub fn trace(&self, spec: &TrialSpec) -> TrialTrace {
        TrialTrace {
            labels: self.steps.iter().map(|s| s.label).collect(),
            clap_step: spec.clap_step,
            horizon: spec.horizon,
            stage: spec.stage,
        }
    }
}

/// Result of a possibly budget-limited episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    Complete(ErrorReport),
    /// The error already accumulated exceeded the budget; `missed` is a
    /// lower bound on the trial error. `steps` were simulated.
    Pruned {
        missed: f64,
        steps: usize,
    },
}

/// Simulate one trial from the all-zeros network state.
///
/// `budget` bounds the error this trial may accumulate: once the weight of
/// failed steps exceeds it the episode stops early. Pass `f64::INFINITY` to
/// always run to the horizon.
pub fn run_episode<O: Observer>(
    ctl: &Controller<'_>,
    spec: &TrialSpec,
    arena: &ArenaConfig,
    alpha: f64,
    budget: f64,
    observer: &mut O,
) -> Result<Outcome> {
    run_episode_from(ctl, spec, arena, alpha, budget, 0, observer)
}

/// [`run_episode`] from an explicit packed initial network state.
pub fn run_episode_from<O: Observer>(
    ctl: &Controller<'_>,
    spec: &TrialSpec,
    arena: &ArenaConfig,
    alpha: f64,
    budget: f64,
    initial_state: u64,
    observer: &mut O,
) -> Result<Outcome> {
    spec.validate()?;
    let (pre_weight, post_weight) = match spec.stage {
        Stage::PhototaxisOnly => (1.0 / spec.horizon as f64, 0.0),
        Stage::Full => (
            alpha / spec.clap_step as f64,
            (1.0 - alpha) / (spec.horizon - spec.clap_step) as f64,
        ),
    };
    let light = arena.light;
    let mut pose = spec.start;
    let mut state = initial_state;
    let mut before = 0usize;
    let mut after = 0usize;
    let mut missed = 0.0f64;

    for t in 1..=spec.horizon {
        if t == spec.perturb_step {
            pose = apply_perturbation(&pose, spec.perturb_angle);
        }
        let frame = SensorFrame {
            sector: light_sector(&pose, &light)?,
            sound: sound_value(t, spec),
        };
        let (next, cmd) = if O::LOOKUPS {
            ctl.step_packed_tracking(state, frame, |n, r| observer.lookup(n, r))
        } else {
            ctl.step_packed(state, frame)
        };
        state = next;
        let prev = pose;
        pose = apply_command(&prev, cmd, arena);
        let label = step_label(&prev, &pose, &light);

        let pre_clap = t <= spec.clap_step;
        let success = if pre_clap {
            label == StepLabel::Toward
        } else {
            label == StepLabel::Away
        };
        if success {
            if pre_clap {
                before += 1;
            } else {
                after += 1;
            }
        } else {
            missed += if pre_clap { pre_weight } else { post_weight };
            if missed > budget {
                return Ok(Outcome::Pruned { missed, steps: t });
            }
        }

        if O::STEPS {
            observer.step(&StepRecord {
                t,
                pose,
                sector: frame.sector,
                sound: frame.sound,
                command: cmd,
                distance: pose.position().distance(&light),
                label,
                state,
            });
        }
    }
    Ok(Outcome::Complete(report_from_counts(
        spec.stage,
        spec.horizon,
        spec.clap_step,
        before,
        after,
        alpha,
    )))
}

/// Column order of the trajectory CSV export.
pub const TRAJECTORY_HEADER: &str = "t,x,y,heading,sector,sound,left,right,distance,label";

/// Write step records as CSV with a header row.
pub fn write_trajectory_csv<W: Write>(mut w: W, steps: &[StepRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in steps {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            s.t,
            s.pose.x,
            s.pose.y,
            s.pose.heading,
            s.sector,
            s.sound as u8,
            s.command.left as u8,
            s.command.right as u8,
            s.distance,
            s.label.as_str()
        )?;
    }
    Ok(())
}
