use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use bnrobot::arena::{Stage, TrialSpec};
use bnrobot::coupling::Controller;
use bnrobot::dynamics::{enumerate_attractors, sample_attractors};
use bnrobot::episode::{run_episode_from, write_trajectory_csv, Outcome, Recorder};
use bnrobot::harness::{
    finish_run, load_config, sort_summaries, test_rows, write_summary_csv, write_trial_csv,
    ExperimentConfig, RunSummary, SummaryRow,
};
use bnrobot::network::initial_state;
use bnrobot::search::{Checkpoint, Descent, IterationRecord, LOG_HEADER};
use bnrobot::{netfile, Error, Result};

const MANIFEST_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "bnrobot",
    version,
    about = "Design Boolean-network robot controllers by stochastic descent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run independent designs, test them and write summaries.
    Design(DesignArgs),
    /// Run one trial of a saved network and print its error.
    Simulate(SimulateArgs),
    /// List the attractors of a saved network.
    Analyze(AnalyzeArgs),
    /// Print the default configuration.
    InitConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct DesignArgs {
    /// Config file or run manifest; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "BNROBOT_OUT", default_value = "bnrobot-out")]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long, env = "BNROBOT_SEED")]
    seed: Option<u64>,
    /// Number of runs, overriding the config.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, env = "BNROBOT_PARALLELISM")]
    parallelism: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Save a resumable checkpoint every N iterations.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Continue runs from checkpoints found in the output directory.
    #[arg(long)]
    resume: bool,
    /// Also write a trajectory CSV for every test trial.
    #[arg(long)]
    trajectories: bool,
    /// Suppress progress and the final summary line
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    network: PathBuf,
    /// Config file supplying arena and schedule parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the random start pose, clap step and perturbation.
    #[arg(long, env = "BNROBOT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "full")]
    stage: StageArg,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long = "t-c")]
    t_c: Option<usize>,
    #[arg(long)]
    perturb_step: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    perturb_angle: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Start from a random network state drawn from this seed instead of
    /// all zeros.
    #[arg(long)]
    random_state: Option<u64>,
    /// Trajectory CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StageArg {
    Full,
    PhototaxisOnly,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    network: PathBuf,
    /// Sample this many random start states instead of sweeping all of them.
    #[arg(long)]
    samples: Option<usize>,
    /// Step limit per sampled trajectory.
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Design(a) => design(a),
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::InitConfig => init_config(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InvalidParameter { .. } | Error::Contract(_) | Error::Parse { .. } => 2,
                Error::Io(_) => 3,
                Error::Capacity(_) => 4,
            })
        }
    }
}

fn io_context(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_context(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_context(path))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn read_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn init_config() -> Result<()> {
    let text =
        serde_json::to_string_pretty(&ExperimentConfig::default()).expect("config serializes");
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct Seeds {
    master: u64,
    training_set: u64,
    test_set: u64,
    runs: Vec<u64>,
}

#[derive(Serialize)]
struct Outputs {
    summary: String,
    trials: String,
    networks: Vec<String>,
    logs: Vec<String>,
}

#[derive(Serialize)]
struct Manifest {
    manifest_version: u32,
    tool_version: &'static str,
    network_format_version: u32,
    config: ExperimentConfig,
    seeds: Seeds,
    outputs: Outputs,
    parallelism: usize,
    started_unix: u64,
    finished_unix: u64,
}

struct RunFiles {
    network: String,
    log: String,
    checkpoint: String,
    trajectories: String,
}

impl RunFiles {
    fn new(run: usize, runs: usize) -> Self {
        let width = (runs.saturating_sub(1)).to_string().len().max(2);
        let id = format!("run_{run:0width$}");
        RunFiles {
            network: format!("networks/{id}.json"),
            log: format!("logs/{id}.csv"),
            checkpoint: format!("checkpoints/{id}.json"),
            trajectories: format!("trajectories/{id}"),
        }
    }
}

struct DesignJob<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    checkpoint_every: Option<usize>,
    resume: bool,
    trajectories: bool,
    quiet: bool,
}

/// Keep the header and the rows of iterations up to `iteration`.
fn truncate_log(path: &Path, iteration: usize) -> Result<()> {
    let file = File::open(path).map_err(io_context(path))?;
    let mut kept = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_context(path))?;
        let keep = match line.split(',').next().and_then(|f| f.parse::<usize>().ok()) {
            Some(i) => i <= iteration,
            None => kept.is_empty(),
        };
        if keep {
            kept.push(line);
        }
    }
    let mut w = create(path)?;
    for line in kept {
        writeln!(w, "{line}").map_err(io_context(path))?;
    }
    w.flush().map_err(io_context(path))
}

fn design_run(job: &DesignJob<'_>, run: usize) -> Result<RunSummary> {
    let files = RunFiles::new(run, job.cfg.runs);
    let log_path = job.out.join(&files.log);
    let ckpt_path = job.out.join(&files.checkpoint);

    let resumed = job.resume && ckpt_path.exists() && log_path.exists();
    let mut descent = if resumed {
        let ckpt = Checkpoint::load(&ckpt_path)?;
        if ckpt.config != job.cfg.run_search(run) {
            return Err(Error::Contract(format!(
                "{} was written for a different configuration",
                ckpt_path.display()
            )));
        }
        truncate_log(&log_path, ckpt.iteration)?;
        Descent::resume(ckpt, &job.cfg.arena)?
    } else {
        Descent::new(&job.cfg.run_search(run), &job.cfg.arena)?
    };

    let mut log = if resumed {
        BufWriter::new(
            fs::OpenOptions::new()
                .append(true)
                .open(&log_path)
                .map_err(io_context(&log_path))?,
        )
    } else {
        let mut w = create(&log_path)?;
        writeln!(w, "{LOG_HEADER}").map_err(io_context(&log_path))?;
        w
    };
    let mut write_error: Option<io::Error> = None;
    let mut record = |r: &IterationRecord<'_>| {
        if write_error.is_none() {
            if let Err(e) = writeln!(log, "{}", r.csv_row()) {
                write_error = Some(e);
            }
        }
    };
    while !descent.is_finished() {
        descent.advance(&mut record)?;
        if let Some(every) = job.checkpoint_every {
            if every > 0 && descent.iteration() % every == 0 {
                descent.checkpoint().save(&ckpt_path)?;
            }
        }
    }
    if let Some(e) = write_error {
        return Err(io_context(&log_path)(e));
    }
    log.flush().map_err(io_context(&log_path))?;
    if job.checkpoint_every.is_some() {
        descent.checkpoint().save(&ckpt_path)?;
    }

    let summary = finish_run(job.cfg, run, descent.finish())?;
    netfile::save(&summary.network, &job.out.join(&files.network))?;
    if job.trajectories {
        write_trajectories(job, &summary, &job.out.join(&files.trajectories))?;
    }
    if !job.quiet {
        eprintln!(
            "run {run}: train median {:.4}, test median {:.4}",
            summary.train.median, summary.test.median
        );
    }
    Ok(summary)
}

fn write_trajectories(job: &DesignJob<'_>, summary: &RunSummary, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let ctl = Controller::new(&summary.network)?;
    for (i, spec) in job.cfg.test_set()?.iter().enumerate() {
        let mut rec = Recorder::default();
        run_episode_from(
            &ctl,
            spec,
            &job.cfg.arena,
            job.cfg.search.alpha,
            f64::INFINITY,
            0,
            &mut rec,
        )?;
        let path = dir.join(format!("trial_{i:02}.csv"));
        let mut w = create(&path)?;
        write_trajectory_csv(&mut w, &rec.steps).map_err(io_context(&path))?;
        w.flush().map_err(io_context(&path))?;
    }
    Ok(())
}

fn design(args: DesignArgs) -> Result<()> {
    let started = unix_now();
    let mut cfg = read_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    cfg.validate()?;
    if args.parallelism == Some(0) {
        return Err(Error::param("--parallelism", "must be at least 1"));
    }
    let parallelism = args
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let out = args.out.as_path();
    for sub in ["networks", "logs"] {
        create_dir(&out.join(sub))?;
    }
    if args.checkpoint_every.is_some() || args.resume {
        create_dir(&out.join("checkpoints"))?;
    }

    let job = DesignJob {
        cfg: &cfg,
        out,
        checkpoint_every: args.checkpoint_every,
        resume: args.resume,
        trajectories: args.trajectories,
        quiet: args.quiet,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::param("--parallelism", e.to_string()))?;
    let mut summaries = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| design_run(&job, r))
            .collect::<Result<Vec<_>>>()
    })?;
    sort_summaries(&mut summaries);

    let ext = match args.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let summary_name = format!("summary.{ext}");
    let trials_name = format!("trials.{ext}");
    let rows = test_rows(&cfg, &summaries)?;
    let summary_path = out.join(&summary_name);
    let trials_path = out.join(&trials_name);
    let mut sw = create(&summary_path)?;
    let mut tw = create(&trials_path)?;
    match args.format {
        Format::Csv => {
            write_summary_csv(&mut sw, &summaries).map_err(io_context(&summary_path))?;
            write_trial_csv(&mut tw, &rows).map_err(io_context(&trials_path))?;
        }
        Format::Json => {
            let table: Vec<SummaryRow> = summaries.iter().map(SummaryRow::from).collect();
            write_json(&mut sw, &table).map_err(io_context(&summary_path))?;
            write_json(&mut tw, &rows).map_err(io_context(&trials_path))?;
        }
    }
    sw.flush().map_err(io_context(&summary_path))?;
    tw.flush().map_err(io_context(&trials_path))?;

    let files: Vec<RunFiles> = (0..cfg.runs).map(|r| RunFiles::new(r, cfg.runs)).collect();
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        network_format_version: netfile::FORMAT_VERSION,
        seeds: Seeds {
            master: cfg.master_seed,
            training_set: cfg.training_seed(),
            test_set: cfg.test_seed(),
            runs: (0..cfg.runs).map(|r| cfg.run_search(r).seed).collect(),
        },
        outputs: Outputs {
            summary: summary_name,
            trials: trials_name,
            networks: files.iter().map(|f| f.network.clone()).collect(),
            logs: files.iter().map(|f| f.log.clone()).collect(),
        },
        config: cfg.clone(),
        parallelism,
        started_unix: started,
        finished_unix: unix_now(),
    };
    let manifest_path = out.join("manifest.json");
    let mut mw = create(&manifest_path)?;
    write_json(&mut mw, &manifest).map_err(io_context(&manifest_path))?;
    mw.flush().map_err(io_context(&manifest_path))?;

    let successes = summaries.iter().filter(|s| s.success()).count();
    if args.quiet {
        return Ok(());
    }
    println!(
        "{} runs, {successes} with test median below {}; results in {}",
        summaries.len(),
        bnrobot::harness::SUCCESS_THRESHOLD,
        out.display()
    );
    Ok(())
}

fn write_json<W: Write>(mut w: W, value: &impl Serialize) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
}

#[derive(Serialize)]
struct SimulationReport {
    trial: TrialSpec,
    error: f64,
    phototaxis_term: f64,
    antiphototaxis_term: f64,
    alpha: f64,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = read_config(args.config.as_deref())?;
    cfg.arena.validate()?;
    let net = netfile::load(&args.network)?;
    let stage = match args.stage {
        StageArg::Full => Stage::Full,
        StageArg::PhototaxisOnly => Stage::PhototaxisOnly,
    };
    let horizon = args.horizon.unwrap_or(cfg.search.horizon(stage));
    if horizon == 0 {
        return Err(Error::param("--horizon", "must be at least 1"));
    }
    let mut spec = TrialSpec::generate(
        args.seed,
        stage,
        horizon,
        cfg.search.clap_window,
        &cfg.arena,
    );
    if stage == Stage::Full {
        match args.t_c {
            Some(t_c) if t_c == 0 || t_c >= horizon => {
                return Err(Error::param(
                    "--t-c",
                    format!("{t_c} not in (0, {horizon})"),
                ))
            }
            Some(t_c) => spec.clap_step = t_c,
            None if spec.clap_step >= horizon => {
                return Err(Error::param(
                    "--t-c",
                    format!("required: the clap window does not fit horizon {horizon}"),
                ))
            }
            None => {}
        }
    }
    if let Some(step) = args.perturb_step {
        if step == 0 || step > horizon {
            return Err(Error::param(
                "--perturb-step",
                format!("{step} not in [1, {horizon}]"),
            ));
        }
        spec.perturb_step = step;
    }
    if let Some(angle) = args.perturb_angle {
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&angle) {
            return Err(Error::param(
                "--perturb-angle",
                format!("{angle} not in [-pi, pi]"),
            ));
        }
        spec.perturb_angle = angle;
    }
    let alpha = args.alpha.unwrap_or(cfg.search.alpha);
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("--alpha", format!("{alpha} not in [0, 1]")));
    }

    let ctl = Controller::new(&net)?;
    let start = initial_state(&net, args.random_state).packed();
    let mut rec = Recorder::default();
    let report = match run_episode_from(
        &ctl,
        &spec,
        &cfg.arena,
        alpha,
        f64::INFINITY,
        start,
        &mut rec,
    )? {
        Outcome::Complete(r) => r,
        Outcome::Pruned { .. } => unreachable!("unbounded episode cannot be pruned"),
    };
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        write_trajectory_csv(&mut w, &rec.steps).map_err(io_context(path))?;
        w.flush().map_err(io_context(path))?;
    }
    match args.format {
        Format::Csv => {
            println!("error,phototaxis_term,antiphototaxis_term,alpha,clap_step,horizon");
            println!(
                "{},{},{},{},{},{}",
                report.error,
                report.phototaxis_term,
                report.antiphototaxis_term,
                report.alpha,
                spec.clap_step,
                spec.horizon
            );
        }
        Format::Json => {
            let r = SimulationReport {
                trial: spec,
                error: report.error,
                phototaxis_term: report.phototaxis_term,
                antiphototaxis_term: report.antiphototaxis_term,
                alpha: report.alpha,
            };
            write_json(io::stdout().lock(), &r)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AttractorRow {
    id: usize,
    period: usize,
    /// Exact basin size, or the number of samples that reached the cycle.
    count: u64,
    cycle: Vec<String>,
}

#[derive(Serialize)]
struct Analysis {
    nodes: usize,
    mode: &'static str,
    /// States swept or samples drawn.
    total: u64,
    attractors: Vec<AttractorRow>,
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let net = netfile::load(&args.network)?;
    let analysis = match args.samples {
        None => {
            let found = enumerate_attractors(&net).map_err(|e| match e {
                Error::Capacity(msg) => Error::Capacity(format!("{msg} (--samples N)")),
                other => other,
            })?;
            Analysis {
                nodes: net.n(),
                mode: "exhaustive",
                total: found.iter().map(|a| a.basin_size).sum(),
                attractors: found
                    .iter()
                    .enumerate()
                    .map(|(id, a)| AttractorRow {
                        id,
                        period: a.period(),
                        count: a.basin_size,
                        cycle: a.cycle.iter().map(|s| s.to_string()).collect(),
                    })
                    .collect(),
            }
        }
        Some(samples) => {
            if args.max_steps == 0 {
                return Err(Error::param("--max-steps", "must be at least 1"));
            }
            let found = sample_attractors(&net, samples, args.max_steps, args.seed)?;
            Analysis {
                nodes: net.n(),
                mode: "sampled",
                total: samples as u64,
                attractors: found
                    .iter()
                    .enumerate()
                    .map(|(id, a)| AttractorRow {
                        id,
                        period: a.cycle.len(),
                        count: a.hits,
                        cycle: a.cycle.iter().map(|s| s.to_string()).collect(),
                    })
                    .collect(),
            }
        }
    };
    match args.format {
        Format::Csv => {
            println!(
                "# nodes {} mode {} total {} attractors {}",
                analysis.nodes,
                analysis.mode,
                analysis.total,
                analysis.attractors.len()
            );
            println!("id,period,count,first_state");
            for a in &analysis.attractors {
                println!("{},{},{},{}", a.id, a.period, a.count, a.cycle[0]);
            }
        }
        Format::Json => write_json(io::stdout().lock(), &analysis)?,
    }
    Ok(())
}
