//! Stochastic descent over truth-table bits.
//!
//! The search state is one network whose topology never changes. Each
//! iteration flips one random bit of one random node's truth table and keeps
//! the flip if the training error does not get worse. Training runs in two
//! stages: short clap-free phototaxis trials first, then full-length trials
//! with the clap. The incumbent is re-evaluated on the stage-2 trials at the
//! switch.
//!
//! Two shortcuts keep the loop fast without changing any decision:
//!
//! * a flip of a table row that the incumbent never looked up during its
//!   evaluation leaves every trajectory unchanged, so its error is known;
//! * a candidate is abandoned as soon as the error it has already
//!   accumulated exceeds the incumbent's total.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{ArenaConfig, Stage, TrialSpec};
use crate::coupling::{random_controller_network, Controller};
use crate::episode::{run_episode, Observer, Outcome};
use crate::error::{Error, Result};
use crate::network::BooleanNetwork;
use crate::objective::{ErrorReport, DEFAULT_ALPHA};
use crate::seed::{self, stream};

/// Parameters of one descent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub nodes: usize,
    pub in_degree: usize,
    pub total_iterations: usize,
    pub stage1_iterations: usize,
    pub stage1_horizon: usize,
    pub stage2_horizon: usize,
    /// Inclusive range of clap steps for stage-2 trials.
    pub clap_window: (usize, usize),
    pub training_set_size: usize,
    /// Seeds the initial network and the move sequence.
    pub seed: u64,
    /// Seeds the training set.
    pub training_seed: u64,
    pub alpha: f64,
    /// Abandon candidates whose partial error already exceeds the incumbent.
    pub prune: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            nodes: 20,
            in_degree: 3,
            total_iterations: 25_000,
            stage1_iterations: 5_000,
            stage1_horizon: 500,
            stage2_horizon: 1_000,
            clap_window: (500, 650),
            training_set_size: 30,
            seed: 0,
            training_seed: 0,
            alpha: DEFAULT_ALPHA,
            prune: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stage1_iterations > self.total_iterations {
            return Err(Error::param(
                "search.stage1_iterations",
                format!(
                    "{} exceeds search.total_iterations = {}",
                    self.stage1_iterations, self.total_iterations
                ),
            ));
        }
        if self.nodes < 7 {
            return Err(Error::param(
                "search.nodes",
                format!("{} is fewer than the 7 sensor/actuator nodes", self.nodes),
            ));
        }
        if self.in_degree == 0 || self.in_degree >= self.nodes {
            return Err(Error::param(
                "search.in_degree",
                format!("{} not in [1, nodes)", self.in_degree),
            ));
        }
        if self.stage1_horizon == 0 {
            return Err(Error::param("search.stage1_horizon", "must be at least 1"));
        }
        let (lo, hi) = self.clap_window;
        if !(lo >= 1 && lo <= hi && hi < self.stage2_horizon) {
            return Err(Error::param(
                "search.clap_window",
                format!(
                    "({lo}, {hi}) must satisfy 1 <= lo <= hi < stage2_horizon = {}",
                    self.stage2_horizon
                ),
            ));
        }
        if self.training_set_size == 0 {
            return Err(Error::param(
                "search.training_set_size",
                "must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param(
                "search.alpha",
                format!("{} not in [0, 1]", self.alpha),
            ));
        }
        Ok(())
    }

    pub fn horizon(&self, stage: Stage) -> usize {
        match stage {
            Stage::PhototaxisOnly => self.stage1_horizon,
            Stage::Full => self.stage2_horizon,
        }
    }

    /// Stage of 1-based iteration `i`; iteration 0 is the initial evaluation.
    pub fn stage_at(&self, iteration: usize) -> Stage {
        if iteration <= self.stage1_iterations && self.stage1_iterations > 0 {
            Stage::PhototaxisOnly
        } else {
            Stage::Full
        }
    }
}

/// Fixed trial set for one stage; trial `i` is drawn from its own seed
/// derived from `seed` and `i`.
pub fn build_training_set(
    seed: u64,
    size: usize,
    stage: Stage,
    cfg: &SearchConfig,
    arena: &ArenaConfig,
) -> Result<Vec<TrialSpec>> {
    if size == 0 {
        return Err(Error::param(
            "size",
            "training set must contain at least one trial",
        ));
    }
    Ok((0..size)
        .map(|i| {
            TrialSpec::generate(
                trial_seed(seed, i),
                stage,
                cfg.horizon(stage),
                cfg.clap_window,
                arena,
            )
        })
        .collect())
}

/// Seed of trial `index` in a set built from `set_seed`.
pub fn trial_seed(set_seed: u64, index: usize) -> u64 {
    seed::derive(set_seed, stream::TRIAL, index as u64)
}

/// Uniform node, then uniform row of that node's table.
pub fn propose_move<R: Rng>(net: &BooleanNetwork, rng: &mut R) -> (usize, usize) {
    let node = rng.gen_range(0..net.n());
    let row = rng.gen_range(0..net.table(node).rows());
    (node, row)
}

/// Sideways and improving moves are accepted.
pub fn accept(candidate_error: f64, incumbent_error: f64) -> bool {
    candidate_error <= incumbent_error
}

/// Table rows read during an evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowUsage {
    offsets: Vec<usize>,
    words: Vec<u64>,
}

impl RowUsage {
    fn new(net: &BooleanNetwork) -> Self {
        let mut offsets = Vec::with_capacity(net.n());
        let mut len = 0;
        for t in net.tables() {
            offsets.push(len);
            len += t.rows().div_ceil(64);
        }
        RowUsage {
            offsets,
            words: vec![0; len],
        }
    }

    pub fn is_used(&self, node: usize, row: usize) -> bool {
        (self.words[self.offsets[node] + (row >> 6)] >> (row & 63)) & 1 == 1
    }
}

impl Observer for RowUsage {
    const LOOKUPS: bool = true;

    #[inline]
    fn lookup(&mut self, node: usize, row: usize) {
        self.words[self.offsets[node] + (row >> 6)] |= 1 << (row & 63);
    }
}

/// Sum of per-trial errors over a fixed trial set, with optional
/// early abandonment.
#[derive(Clone, Debug)]
pub struct Evaluator {
    trials: Vec<TrialSpec>,
    arena: ArenaConfig,
    alpha: f64,
}

/// Slack added to the pruning bound so that rounding in the running bound
/// can never abandon a candidate the exact comparison would accept.
const PRUNE_SLACK: f64 = 1e-9;

/// Result of a bounded evaluation.
#[derive(Clone, Debug)]
pub enum Evaluation {
    /// Sum of per-trial errors, in trial order.
    Complete { total: f64, usage: RowUsage },
    /// Abandoned; `lower_bound` is a lower bound on the total.
    Pruned { lower_bound: f64 },
}

impl Evaluator {
    pub fn new(trials: Vec<TrialSpec>, arena: ArenaConfig, alpha: f64) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::param("trials", "trial list is empty"));
        }
        Ok(Evaluator {
            trials,
            arena,
            alpha,
        })
    }

    pub fn trials(&self) -> &[TrialSpec] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Per-trial reports without pruning.
    pub fn reports(&self, net: &BooleanNetwork) -> Result<Vec<ErrorReport>> {
        crate::objective::trial_errors(net, &self.trials, &self.arena, self.alpha)
    }

    /// Evaluate, giving up once the total provably exceeds `limit`.
    /// `steps` is incremented by the number of simulated control steps.
    pub fn evaluate(
        &self,
        net: &BooleanNetwork,
        limit: f64,
        steps: &mut u64,
    ) -> Result<Evaluation> {
        let ctl = Controller::new(net)?;
        let mut usage = RowUsage::new(net);
        let mut total = 0.0f64;
        for spec in &self.trials {
            let budget = limit - total + PRUNE_SLACK;
            match run_episode(&ctl, spec, &self.arena, self.alpha, budget, &mut usage)? {
                Outcome::Complete(r) => {
                    total += r.error;
                    *steps += spec.horizon as u64;
                }
                Outcome::Pruned { missed, steps: s } => {
                    *steps += s as u64;
                    return Ok(Evaluation::Pruned {
                        lower_bound: total + missed,
                    });
                }
            }
        }
        Ok(Evaluation::Complete { total, usage })
    }
}

/// One point of the incumbent's error history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub stage: Stage,
    pub incumbent_error: f64,
}

/// Counters describing how much simulation a run needed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Candidates decided without simulation (unused table row).
    pub neutral: u64,
    /// Candidates simulated on the whole trial set.
    pub complete: u64,
    /// Candidates abandoned early.
    pub pruned: u64,
    /// Control steps simulated, including incumbent evaluations.
    pub simulated_steps: u64,
}

/// Outcome of a descent run.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub initial_network: BooleanNetwork,
    pub best_network: BooleanNetwork,
    /// Mean training error of the final incumbent on its final stage.
    pub best_error: f64,
    pub final_stage: Stage,
    /// Incumbent error after every iteration; iteration 0 is the initial
    /// evaluation, and the stage switch adds a re-evaluation point.
    pub incumbent_trace: Vec<TracePoint>,
    pub accepted_moves: usize,
    pub stats: SearchStats,
}

/// What happened in one iteration.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord<'a> {
    pub iteration: usize,
    pub stage: Stage,
    pub node: usize,
    pub row: usize,
    /// Mean candidate error, or a lower bound on it when `complete` is false.
    pub candidate_error: f64,
    pub complete: bool,
    pub accepted: bool,
    pub incumbent_error: f64,
    pub incumbent: &'a BooleanNetwork,
}

/// Search log header; one row per iteration.
pub const LOG_HEADER: &str =
    "iteration,stage,node,row,candidate_error,complete,accepted,incumbent_error";

impl IterationRecord<'_> {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iteration,
            self.stage.as_str(),
            self.node,
            self.row,
            self.candidate_error,
            self.complete,
            self.accepted,
            self.incumbent_error
        )
    }
}

/// Resumable snapshot of a descent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Iterations completed so far.
    pub iteration: usize,
    pub accepted_moves: usize,
    pub network: crate::netfile::NetworkFile,
    pub move_rng: ChaCha8Rng,
    pub config: SearchConfig,
}

impl Checkpoint {
    /// Write atomically: to a sibling temporary file, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        std::fs::write(&tmp, text + "\n")?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            Error::parse(
                format!("{} line {} column {}", path.display(), e.line(), e.column()),
                e.to_string(),
            )
        })
    }
}

/// A descent in progress.
pub struct Descent {
    cfg: SearchConfig,
    stage1: Option<Evaluator>,
    stage2: Evaluator,
    initial: BooleanNetwork,
    incumbent: BooleanNetwork,
    incumbent_total: f64,
    usage: RowUsage,
    stage: Stage,
    rng: ChaCha8Rng,
    iteration: usize,
    accepted: usize,
    trace: Vec<TracePoint>,
    stats: SearchStats,
}

impl Descent {
    /// Random initial network, training sets, and the initial evaluation.
    pub fn new(cfg: &SearchConfig, arena: &ArenaConfig) -> Result<Self> {
        cfg.validate()?;
        let net = random_controller_network(
            cfg.nodes,
            cfg.in_degree,
            seed::derive(cfg.seed, stream::NETWORK_INIT, 0),
        )?;
        let rng = seed::rng(seed::derive(cfg.seed, stream::MOVES, 0));
        Self::start(cfg, arena, net, rng, 0, 0)
    }

    /// Start from `net` instead of a random network; moves are still drawn
    /// from `cfg.seed`.
    pub fn with_network(
        cfg: &SearchConfig,
        arena: &ArenaConfig,
        net: BooleanNetwork,
    ) -> Result<Self> {
        let rng = seed::rng(seed::derive(cfg.seed, stream::MOVES, 0));
        Self::start(cfg, arena, net, rng, 0, 0)
    }

    /// Continue from a checkpoint. The trace of the resumed descent starts
    /// at the checkpoint.
    pub fn resume(checkpoint: Checkpoint, arena: &ArenaConfig) -> Result<Self> {
        let net = BooleanNetwork::try_from(checkpoint.network)?;
        Self::start(
            &checkpoint.config,
            arena,
            net,
            checkpoint.move_rng,
            checkpoint.iteration,
            checkpoint.accepted_moves,
        )
    }

    fn start(
        cfg: &SearchConfig,
        arena: &ArenaConfig,
        net: BooleanNetwork,
        rng: ChaCha8Rng,
        iteration: usize,
        accepted: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        arena.validate()?;
        let set = |stage| {
            build_training_set(cfg.training_seed, cfg.training_set_size, stage, cfg, arena)
                .and_then(|t| Evaluator::new(t, arena.clone(), cfg.alpha))
        };
        let stage1 = if cfg.stage1_iterations > 0 {
            Some(set(Stage::PhototaxisOnly)?)
        } else {
            None
        };
        let stage2 = set(Stage::Full)?;
        let stage = cfg.stage_at(iteration);
        let mut d = Descent {
            cfg: cfg.clone(),
            stage1,
            stage2,
            initial: net.clone(),
            incumbent: net,
            incumbent_total: 0.0,
            usage: RowUsage {
                offsets: Vec::new(),
                words: Vec::new(),
            },
            stage,
            rng,
            iteration,
            accepted,
            trace: Vec::new(),
            stats: SearchStats::default(),
        };
        d.reevaluate()?;
        Ok(d)
    }

    fn evaluator(&self) -> &Evaluator {
        match (self.stage, &self.stage1) {
            (Stage::PhototaxisOnly, Some(e)) => e,
            _ => &self.stage2,
        }
    }

    fn mean(&self, total: f64) -> f64 {
        total / self.evaluator().len() as f64
    }

    fn reevaluate(&mut self) -> Result<()> {
        let mut steps = 0;
        match self
            .evaluator()
            .evaluate(&self.incumbent, f64::INFINITY, &mut steps)?
        {
            Evaluation::Complete { total, usage } => {
                self.incumbent_total = total;
                self.usage = usage;
            }
            Evaluation::Pruned { .. } => unreachable!("unbounded evaluation"),
        }
        self.stats.simulated_steps += steps;
        self.trace.push(TracePoint {
            iteration: self.iteration,
            stage: self.stage,
            incumbent_error: self.mean(self.incumbent_total),
        });
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.cfg.total_iterations
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn incumbent(&self) -> &BooleanNetwork {
        &self.incumbent
    }

    pub fn incumbent_error(&self) -> f64 {
        self.mean(self.incumbent_total)
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Run one iteration and report it to `observer`.
    pub fn advance(&mut self, observer: &mut impl FnMut(&IterationRecord<'_>)) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        let iteration = self.iteration + 1;
        if self.cfg.stage_at(iteration) != self.stage {
            self.stage = self.cfg.stage_at(iteration);
            self.reevaluate()?;
        }
        let (node, row) = propose_move(&self.incumbent, &mut self.rng);

        let (candidate_total, complete, accepted) = if !self.usage.is_used(node, row) {
            self.stats.neutral += 1;
            self.incumbent.toggle_table_bit(node, row)?;
            (self.incumbent_total, true, true)
        } else {
            self.incumbent.toggle_table_bit(node, row)?;
            let limit = if self.cfg.prune {
                self.incumbent_total
            } else {
                f64::INFINITY
            };
            let mut steps = 0;
            let eval = self
                .evaluator()
                .evaluate(&self.incumbent, limit, &mut steps)?;
            self.stats.simulated_steps += steps;
            match eval {
                Evaluation::Complete { total, usage } => {
                    self.stats.complete += 1;
                    let ok = accept(total, self.incumbent_total);
                    if ok {
                        self.incumbent_total = total;
                        self.usage = usage;
                    } else {
                        self.incumbent.toggle_table_bit(node, row)?;
                    }
                    (total, true, ok)
                }
                Evaluation::Pruned { lower_bound } => {
                    self.stats.pruned += 1;
                    self.incumbent.toggle_table_bit(node, row)?;
                    (lower_bound, false, false)
                }
            }
        };
        if accepted {
            self.accepted += 1;
        }
        self.iteration = iteration;
        let incumbent_error = self.mean(self.incumbent_total);
        self.trace.push(TracePoint {
            iteration,
            stage: self.stage,
            incumbent_error,
        });
        observer(&IterationRecord {
            iteration,
            stage: self.stage,
            node,
            row,
            candidate_error: self.mean(candidate_total),
            complete,
            accepted,
            incumbent_error,
            incumbent: &self.incumbent,
        });
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: crate::netfile::FORMAT_VERSION,
            iteration: self.iteration,
            accepted_moves: self.accepted,
            network: (&self.incumbent).into(),
            move_rng: self.rng.clone(),
            config: self.cfg.clone(),
        }
    }

    pub fn finish(self) -> SearchResult {
        SearchResult {
            best_error: self.mean(self.incumbent_total),
            final_stage: self.stage,
            initial_network: self.initial,
            best_network: self.incumbent,
            incumbent_trace: self.trace,
            accepted_moves: self.accepted,
            stats: self.stats,
        }
    }

    /// Run to completion.
    pub fn run(mut self, observer: &mut impl FnMut(&IterationRecord<'_>)) -> Result<SearchResult> {
        while !self.is_finished() {
            self.advance(observer)?;
        }
        Ok(self.finish())
    }
}

/// Full two-stage descent.
pub fn stochastic_descent(cfg: &SearchConfig, arena: &ArenaConfig) -> Result<SearchResult> {
    Descent::new(cfg, arena)?.run(&mut |_| {})
}

/// [`stochastic_descent`] reporting every iteration to `observer`.
pub fn stochastic_descent_with(
    cfg: &SearchConfig,
    arena: &ArenaConfig,
    observer: &mut impl FnMut(&IterationRecord<'_>),
) -> Result<SearchResult> {
    Descent::new(cfg, arena)?.run(observer)
}
