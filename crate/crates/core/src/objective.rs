//! Trial error: a weighted mean of the fraction of phototaxis steps spent
//! approaching the light and the fraction of antiphototaxis steps spent
//! moving away from it.

use serde::Serialize;

use crate::arena::{ArenaConfig, Stage, StepLabel, TrialSpec};
use crate::episode::{run_episode, Outcome};
use crate::error::{Error, Result};
use crate::network::BooleanNetwork;

/// Default weight of the phototaxis term.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Per-step labels of one finished trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialTrace {
    /// Label of step `i` at index `i - 1`.
    pub labels: Vec<StepLabel>,
    pub clap_step: usize,
    pub horizon: usize,
    pub stage: Stage,
}

/// Error of one trial split into its two terms.
///
/// For phototaxis-only trials the antiphototaxis term is reported as 0 and
/// `error` equals `phototaxis_term`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub error: f64,
    pub phototaxis_term: f64,
    pub antiphototaxis_term: f64,
    pub alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} not in [0, 1]")))
    }
}

/// Error from success counts: `before` steps labelled toward in
/// `1..=clap_step`, `after` steps labelled away in `clap_step+1..=horizon`.
pub(crate) fn report_from_counts(
    stage: Stage,
    horizon: usize,
    clap_step: usize,
    before: usize,
    after: usize,
    alpha: f64,
) -> ErrorReport {
    match stage {
        Stage::PhototaxisOnly => {
            let p = 1.0 - before as f64 / horizon as f64;
            ErrorReport {
                error: p,
                phototaxis_term: p,
                antiphototaxis_term: 0.0,
                alpha,
            }
        }
        Stage::Full => {
            let p = 1.0 - before as f64 / clap_step as f64;
            let a = 1.0 - after as f64 / (horizon - clap_step) as f64;
            ErrorReport {
                error: alpha * p + (1.0 - alpha) * a,
                phototaxis_term: p,
                antiphototaxis_term: a,
                alpha,
            }
        }
    }
}

/// Error of a labelled trace.
pub fn trial_error(trace: &TrialTrace, alpha: f64) -> Result<ErrorReport> {
    check_alpha(alpha)?;
    if trace.labels.len() != trace.horizon || trace.horizon == 0 {
        return Err(Error::Contract(format!(
            "trace has {} labels for horizon {}",
            trace.labels.len(),
            trace.horizon
        )));
    }
    let split = match trace.stage {
        Stage::Full => {
            if !(1..trace.horizon).contains(&trace.clap_step) {
                return Err(Error::Contract(format!(
                    "clap step {} not in [1, {})",
                    trace.clap_step, trace.horizon
                )));
            }
            trace.clap_step
        }
        Stage::PhototaxisOnly => trace.horizon,
    };
    let (pre, post) = trace.labels.split_at(split);
    let before = pre.iter().filter(|l| **l == StepLabel::Toward).count();
    let after = post.iter().filter(|l| **l == StepLabel::Away).count();
    Ok(report_from_counts(
        trace.stage,
        trace.horizon,
        trace.clap_step,
        before,
        after,
        alpha,
    ))
}

/// Run every trial end to end and return the per-trial reports.
pub fn trial_errors(
    net: &BooleanNetwork,
    trials: &[TrialSpec],
    cfg: &ArenaConfig,
    alpha: f64,
) -> Result<Vec<ErrorReport>> {
    check_alpha(alpha)?;
    let ctl = crate::coupling::Controller::new(net)?;
    trials
        .iter()
        .map(
            |spec| match run_episode(&ctl, spec, cfg, alpha, f64::INFINITY, &mut ())? {
                Outcome::Complete(r) => Ok(r),
                Outcome::Pruned { .. } => unreachable!("unbounded episode cannot be pruned"),
            },
        )
        .collect()
}

/// Arithmetic mean of the per-trial errors, summed in trial order.
pub fn aggregate_error(
    net: &BooleanNetwork,
    trials: &[TrialSpec],
    cfg: &ArenaConfig,
    alpha: f64,
) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::param("trials", "trial list is empty"));
    }
    let reports = trial_errors(net, trials, cfg, alpha)?;
    Ok(reports.iter().map(|r| r.error).sum::<f64>() / reports.len() as f64)
}
