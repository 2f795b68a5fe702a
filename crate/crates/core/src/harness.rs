//! Repeated independent designs, held-out testing and boxplot summaries.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arena::{ArenaConfig, Stage, TrialSpec};
use crate::error::{Error, Result};
use crate::network::BooleanNetwork;
use crate::objective::{trial_errors, ErrorReport};
use crate::search::{
    build_training_set, trial_seed, Descent, IterationRecord, SearchConfig, SearchResult,
    SearchStats,
};
use crate::seed::{self, stream};
use crate::stats::{summarize, Summary};

/// Test median below which a run counts as a success.
pub const SUCCESS_THRESHOLD: f64 = 0.11;

/// Experiment-level parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub test_set_size: usize,
    pub master_seed: u64,
    /// `seed` and `training_seed` are overwritten per run.
    pub search: SearchConfig,
    pub arena: ArenaConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            runs: 30,
            test_set_size: 30,
            master_seed: 1,
            search: SearchConfig::default(),
            arena: ArenaConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::param("experiment.runs", "must be at least 1"));
        }
        if self.test_set_size == 0 {
            return Err(Error::param(
                "experiment.test_set_size",
                "must be at least 1",
            ));
        }
        self.search.validate()?;
        self.arena.validate()
    }

    pub fn training_seed(&self) -> u64 {
        seed::derive(self.master_seed, stream::TRAINING_SET, 0)
    }

    pub fn test_seed(&self) -> u64 {
        seed::derive(self.master_seed, stream::TEST_SET, 0)
    }

    /// Search configuration of run `run`.
    pub fn run_search(&self, run: usize) -> SearchConfig {
        SearchConfig {
            seed: seed::derive(self.master_seed, stream::RUN, run as u64),
            training_seed: self.training_seed(),
            ..self.search.clone()
        }
    }

    /// Stage-2 training trials shared by every run.
    pub fn training_set(&self) -> Result<Vec<TrialSpec>> {
        build_training_set(
            self.training_seed(),
            self.search.training_set_size,
            Stage::Full,
            &self.search,
            &self.arena,
        )
    }

    /// Held-out trials, drawn from a separate seed stream.
    pub fn test_set(&self) -> Result<Vec<TrialSpec>> {
        build_training_set(
            self.test_seed(),
            self.test_set_size,
            Stage::Full,
            &self.search,
            &self.arena,
        )
    }
}

/// Parse a config document. A run manifest is accepted too; its `config`
/// section is used.
pub fn config_from_json(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            format!("config line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let value = match value {
        serde_json::Value::Object(mut map) if map.contains_key("manifest_version") => map
            .remove("config")
            .ok_or_else(|| Error::parse("manifest", "missing `config` section"))?,
        other => other,
    };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        Error::parse(
            format!("config field `{field}`"),
            e.into_inner().to_string(),
        )
    })
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    config_from_json(&text).map_err(|e| match e {
        Error::Parse { context, reason } => Error::Parse {
            context: format!("{}: {context}", path.display()),
            reason,
        },
        other => other,
    })
}

/// Result of one design run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    /// Mean training error of the final incumbent (the search objective).
    pub training_error: f64,
    pub train_errors: Vec<f64>,
    pub train: Summary,
    pub test_reports: Vec<ErrorReport>,
    pub test: Summary,
    pub accepted_moves: usize,
    pub stats: SearchStats,
    pub network: BooleanNetwork,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.test.median < SUCCESS_THRESHOLD
    }
}

/// Design and test one run, reporting every search iteration to `observer`.
pub fn run_single(
    cfg: &ExperimentConfig,
    run: usize,
    observer: &mut impl FnMut(&IterationRecord<'_>),
) -> Result<RunSummary> {
    let result = Descent::new(&cfg.run_search(run), &cfg.arena)?.run(observer)?;
    finish_run(cfg, run, result)
}

/// Test the outcome of run `run`'s descent on the training and held-out
/// sets.
pub fn finish_run(cfg: &ExperimentConfig, run: usize, result: SearchResult) -> Result<RunSummary> {
    let alpha = cfg.search.alpha;
    let net = result.best_network;
    let train_errors: Vec<f64> = trial_errors(&net, &cfg.training_set()?, &cfg.arena, alpha)?
        .iter()
        .map(|r| r.error)
        .collect();
    let test_reports = trial_errors(&net, &cfg.test_set()?, &cfg.arena, alpha)?;
    let test_errors: Vec<f64> = test_reports.iter().map(|r| r.error).collect();
    Ok(RunSummary {
        run,
        seed: cfg.run_search(run).seed,
        training_error: result.best_error,
        train: summarize(&train_errors)?,
        train_errors,
        test: summarize(&test_errors)?,
        test_reports,
        accepted_moves: result.accepted_moves,
        stats: result.stats,
        network: net,
    })
}

/// Order by training median, then run id.
pub fn sort_summaries(summaries: &mut [RunSummary]) {
    summaries.sort_by(|a, b| {
        a.train
            .median
            .total_cmp(&b.train.median)
            .then(a.run.cmp(&b.run))
    });
}

/// All runs, in parallel on the current rayon pool, sorted by training
/// median.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let mut out = (0..cfg.runs)
        .into_par_iter()
        .map(|r| run_single(cfg, r, &mut |_| {}))
        .collect::<Result<Vec<_>>>()?;
    sort_summaries(&mut out);
    Ok(out)
}

/// Flat per-run record of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub run: usize,
    pub seed: u64,
    pub training_error: f64,
    pub train_median: f64,
    pub test_median: f64,
    pub test_q1: f64,
    pub test_q3: f64,
    pub success: bool,
    pub accepted_moves: usize,
}

impl From<&RunSummary> for SummaryRow {
    fn from(s: &RunSummary) -> Self {
        SummaryRow {
            run: s.run,
            seed: s.seed,
            training_error: s.training_error,
            train_median: s.train.median,
            test_median: s.test.median,
            test_q1: s.test.q1,
            test_q3: s.test.q3,
            success: s.success(),
            accepted_moves: s.accepted_moves,
        }
    }
}

pub const SUMMARY_HEADER: &str = "run,train_median,test_median,test_q1,test_q3,success";

pub fn write_summary_csv<W: Write>(mut w: W, summaries: &[RunSummary]) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.run,
            s.train.median,
            s.test.median,
            s.test.q1,
            s.test.q3,
            s.success()
        )?;
    }
    Ok(())
}

/// One row of the per-trial results export.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRow {
    pub run: usize,
    pub trial: usize,
    pub seed: u64,
    pub clap_step: usize,
    pub error: f64,
    pub phototaxis_term: f64,
    pub antiphototaxis_term: f64,
}

pub const TRIAL_HEADER: &str = "run,trial,seed,clap_step,error,phototaxis_term,antiphototaxis_term";

/// Per-test-trial rows of every run, in summary order.
pub fn test_rows(cfg: &ExperimentConfig, summaries: &[RunSummary]) -> Result<Vec<TrialRow>> {
    let tests = cfg.test_set()?;
    let test_seed = cfg.test_seed();
    Ok(summaries
        .iter()
        .flat_map(|s| {
            s.test_reports
                .iter()
                .enumerate()
                .map(move |(i, r)| (s.run, i, r))
        })
        .map(|(run, i, r)| TrialRow {
            run,
            trial: i,
            seed: trial_seed(test_seed, i),
            clap_step: tests[i].clap_step,
            error: r.error,
            phototaxis_term: r.phototaxis_term,
            antiphototaxis_term: r.antiphototaxis_term,
        })
        .collect())
}

pub fn write_trial_csv<W: Write>(mut w: W, rows: &[TrialRow]) -> std::io::Result<()> {
    writeln!(w, "{TRIAL_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.run, r.trial, r.seed, r.clap_step, r.error, r.phototaxis_term, r.antiphototaxis_term
        )?;
    }
    Ok(())
}
