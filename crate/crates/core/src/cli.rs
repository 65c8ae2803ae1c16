//! Command-line front end: `detect`, `simulate`, `sweep`, `roc`, `scale` and
//! `replay`.
//!
//! Exit codes: 0 on success (all honest for `detect`), 10 when `detect` finds
//! misbehavior, 2 on usage, parse or validation errors. With `--out DIR`
//! every artifact is written atomically next to a `manifest.json`; without
//! it the main artifact goes to standard output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::broker::{replay_verdicts, run_cycles, BrokerError, SimConfig, SimulationTrace};
use crate::misbehavior::{detect, DetectParams, MisbehaviorError, ReportedOpinion};
use crate::scenarios::intersection::{adjudicate_run, run_intersection, sample_run};
use crate::scenarios::{
    large_scale_synthetic, roc_sweep, run_rng, theta_grid, threshold_sweep, to_csv, IntersectionConfig,
    IntersectionStats, LargeScaleConfig, Scenario, ScenarioError,
};
use crate::trust::{TrustError, TrustStore};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISBEHAVIOR: i32 = 10;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error(transparent)]
    Misbehavior(#[from] MisbehaviorError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error("replay mismatch at cycles {0:?}")]
    ReplayMismatch(Vec<u64>),
}

#[derive(Debug, Parser)]
#[command(name = "sl-trust", version, about = "Opinion-based misbehavior detection and trust revision")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a set of reported opinions.
    Detect(DetectArgs),
    /// Run a broker simulation (`--config`) or an intersection scenario (`--scenario`).
    Simulate(SimulateArgs),
    /// Detection rates over a θ grid.
    Sweep(SweepArgs),
    /// False/true positive rates of the faulty-RSU scenario over a θ grid.
    Roc(RocArgs),
    /// Synthetic large-population detection grid.
    Scale(ScaleArgs),
    /// Re-run every verdict of a broker trace and compare.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output directory; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct Grid {
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub theta_step: Option<f64>,
}

impl Grid {
    fn thetas(&self, default: (f64, f64, f64)) -> Result<Vec<f64>, CliError> {
        Ok(theta_grid(
            self.theta_min.unwrap_or(default.0),
            self.theta_max.unwrap_or(default.1),
            self.theta_step.unwrap_or(default.2),
        )?)
    }

    fn is_set(&self) -> bool {
        self.theta_min.is_some() || self.theta_max.is_some() || self.theta_step.is_some()
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// JSON array of `{agent, opinion, context?}` reports.
    #[arg(long)]
    pub reports: PathBuf,
    /// Trust store as JSON lines.
    #[arg(long)]
    pub trust: Option<PathBuf>,
    #[arg(long, default_value_t = 0.15)]
    pub theta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Broker simulation config, or intersection config with `--scenario`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub scenario: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    /// Broker cycles; defaults to the config's value.
    #[arg(long)]
    pub cycles: Option<u64>,
    /// Emit the sampled opinions and verdict of this single run instead.
    #[arg(long)]
    pub trace_run: Option<u64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    /// `{"intersection": {...}, "faults": [[mu_est, sigma_est], ...]}`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Agent reports per grid cell.
    #[arg(long)]
    pub runs: Option<usize>,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// JSON-lines trace written by `simulate --config`.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// ROC sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RocConfig {
    pub intersection: IntersectionConfig,
    pub faults: Vec<(f64, f64)>,
}

impl Default for RocConfig {
    fn default() -> Self {
        RocConfig {
            intersection: IntersectionConfig::default(),
            faults: vec![(0.7, 0.75), (0.8, 0.75), (0.9, 0.75), (1.0, 0.75)],
        }
    }
}

/// Provenance record written next to every artifact set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub tool_version: String,
    pub duration_secs: f64,
    pub artifacts: Vec<String>,
}

/// Flat CSV form of [`IntersectionStats`].
#[derive(Debug, Clone, PartialEq, Serialize)]
struct IntersectionRow {
    scenario: u8,
    theta: f64,
    runs: usize,
    seed: u64,
    p_detected: f64,
    p_at_least_one: f64,
    p_wrong_accusation: f64,
    p_all_honest: f64,
    p_rsu_flagged: f64,
    false_positive_rate: f64,
    recalibrated_mu: Option<f64>,
    recalibrated_sigma: Option<f64>,
}

impl From<&IntersectionStats> for IntersectionRow {
    fn from(s: &IntersectionStats) -> Self {
        IntersectionRow {
            scenario: s.scenario.number(),
            theta: s.theta,
            runs: s.runs,
            seed: s.seed,
            p_detected: s.p_detected,
            p_at_least_one: s.p_at_least_one,
            p_wrong_accusation: s.p_wrong_accusation,
            p_all_honest: s.p_all_honest,
            p_rsu_flagged: s.p_rsu_flagged,
            false_positive_rate: s.false_positive_rate,
            recalibrated_mu: s.recalibrated_mean.map(|r| r.0),
            recalibrated_sigma: s.recalibrated_mean.map(|r| r.1),
        }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn config_or_default<T: for<'de> Deserialize<'de> + Default>(path: Option<&PathBuf>) -> Result<T, CliError> {
    path.map(|p| read_json(p)).transpose().map(Option::unwrap_or_default)
}

fn rows<T: Serialize>(rows: &[T], format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => Ok(to_csv(rows)?),
        Format::Json => Ok(json(&rows)),
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output values serialize");
    s.push('\n');
    s
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Collects artifacts and emits them either to `--out` or to stdout.
struct Emitter {
    command: &'static str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    started: Instant,
    artifacts: Vec<(String, String)>,
}

impl Emitter {
    fn new(command: &'static str, config: Option<&PathBuf>, seed: Option<u64>, out: Option<&PathBuf>) -> Self {
        Emitter {
            command,
            config: config.cloned(),
            seed,
            out: out.cloned(),
            started: Instant::now(),
            artifacts: Vec::new(),
        }
    }

    fn add(&mut self, name: String, content: String) {
        self.artifacts.push((name, content));
    }

    /// Without `--out` only the first artifact is printed.
    fn finish(self) -> Result<(), CliError> {
        let Some(dir) = self.out else {
            if let Some((_, content)) = self.artifacts.first() {
                print!("{content}");
            }
            return Ok(());
        };
        fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
        for (name, content) in &self.artifacts {
            write_atomic(&dir.join(name), content.as_bytes())?;
        }
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config,
            seed: self.seed,
            out_dir: dir.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: self.started.elapsed().as_secs_f64(),
            artifacts: self.artifacts.iter().map(|(n, _)| n.clone()).collect(),
        };
        write_atomic(&dir.join("manifest.json"), json(&manifest).as_bytes())
    }
}

fn check_runs(runs: usize) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(CliError::Usage(format!("--theta {theta} is outside [0, 1]")));
    }
    Ok(())
}

pub fn cmd_detect(args: &DetectArgs) -> Result<i32, CliError> {
    check_theta(args.theta)?;
    let reports: Vec<ReportedOpinion> = read_json(&args.reports)?;
    let store = match &args.trust {
        Some(p) => TrustStore::from_json_lines(&read(p)?)
            .map_err(|e| CliError::Parse { path: p.clone(), message: e.to_string() })?,
        None => TrustStore::new(),
    };
    let result = detect(&reports, &store, &DetectParams::new(args.theta))?;
    let mut em = Emitter::new("detect", Some(&args.reports), None, args.out.as_ref());
    em.add("classification.json".into(), json(&result));
    em.finish()?;
    Ok(if result.misbehaving.is_empty() { EXIT_OK } else { EXIT_MISBEHAVIOR })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    match args.scenario {
        Some(n) => cmd_intersection(args, Scenario::try_from(n)?),
        None => cmd_broker(args),
    }
}

fn cmd_intersection(args: &SimulateArgs, scenario: Scenario) -> Result<i32, CliError> {
    let cfg: IntersectionConfig = config_or_default(args.config.as_ref())?;
    let seed = args.seed.unwrap_or(2024);
    let theta = args.theta.unwrap_or(0.15);
    check_theta(theta)?;
    let mut em = Emitter::new("simulate", args.config.as_ref(), Some(seed), args.output.out.as_ref());
    if let Some(run) = args.trace_run {
        cfg.validate()?;
        let sample = sample_run(scenario, &cfg, &mut run_rng(seed, run));
        let result = adjudicate_run(&sample, theta)?;
        em.add(
            format!("run-{run}.json"),
            json(&serde_json::json!({"run": run, "theta": theta, "sample": sample, "result": result})),
        );
    } else {
        check_runs(args.runs)?;
        let stats = run_intersection(scenario, theta, args.runs, seed, &cfg)?;
        let row = IntersectionRow::from(&stats);
        em.add(format!("intersection.{}", ext(args.output.format)), rows(&[row], args.output.format)?);
    }
    em.finish()?;
    Ok(EXIT_OK)
}

fn cmd_broker(args: &SimulateArgs) -> Result<i32, CliError> {
    let Some(path) = &args.config else {
        return Err(CliError::Usage("simulate needs --config (broker simulation) or --scenario {1,2,3}".into()));
    };
    let mut cfg = SimConfig::from_json(&read(path)?)
        .map_err(|e| CliError::Parse { path: path.clone(), message: e.to_string() })?;
    if let Some(t) = args.theta {
        check_theta(t)?;
        cfg.theta = t;
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let cycles = args.cycles.unwrap_or(cfg.cycles);
    let outcome = run_cycles(&cfg, cycles, seed)?;
    let mut em = Emitter::new("simulate", Some(path), Some(seed), args.output.out.as_ref());
    em.add("trace.jsonl".into(), outcome.trace.to_json_lines());
    em.add("trust.jsonl".into(), outcome.trust.to_json_lines());
    em.finish()?;
    Ok(EXIT_OK)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    check_runs(args.runs)?;
    let cfg: IntersectionConfig = config_or_default(args.config.as_ref())?;
    let thetas = args.grid.thetas((0.10, 0.30, 0.01))?;
    let out = threshold_sweep(&thetas, args.runs, args.seed, &cfg)?;
    let mut em = Emitter::new("sweep", args.config.as_ref(), Some(args.seed), args.output.out.as_ref());
    em.add(format!("sweep.{}", ext(args.output.format)), rows(&out, args.output.format)?);
    em.finish()?;
    Ok(EXIT_OK)
}

pub fn cmd_roc(args: &RocArgs) -> Result<i32, CliError> {
    check_runs(args.runs)?;
    let cfg: RocConfig = config_or_default(args.config.as_ref())?;
    let thetas = args.grid.thetas((0.05, 0.30, 0.005))?;
    let out = roc_sweep(&cfg.faults, &thetas, args.runs, args.seed, &cfg.intersection)?;
    let mut em = Emitter::new("roc", args.config.as_ref(), Some(args.seed), args.output.out.as_ref());
    em.add(format!("roc.{}", ext(args.output.format)), rows(&out, args.output.format)?);
    em.finish()?;
    Ok(EXIT_OK)
}

pub fn cmd_scale(args: &ScaleArgs) -> Result<i32, CliError> {
    let mut cfg: LargeScaleConfig = config_or_default(args.config.as_ref())?;
    if let Some(n) = args.runs {
        check_runs(n)?;
        cfg.reports_per_cell = n;
    }
    if args.grid.is_set() {
        cfg.thetas = args.grid.thetas((0.05, 0.30, 0.05))?;
    }
    let out = large_scale_synthetic(&cfg, args.seed)?;
    let mut em = Emitter::new("scale", args.config.as_ref(), Some(args.seed), args.output.out.as_ref());
    em.add(format!("scale.{}", ext(args.output.format)), rows(&out, args.output.format)?);
    em.finish()?;
    Ok(EXIT_OK)
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<i32, CliError> {
    let trace = SimulationTrace::from_json_lines(&read(&args.trace)?)
        .map_err(|e| CliError::Parse { path: args.trace.clone(), message: e.to_string() })?;
    let summary = replay_verdicts(&trace)?;
    let mut em = Emitter::new("replay", Some(&args.trace), None, args.out.as_ref());
    em.add("replay.json".into(), json(&summary));
    em.finish()?;
    if summary.mismatches.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::ReplayMismatch(summary.mismatches))
    }
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Roc(a) => cmd_roc(a),
        Command::Scale(a) => cmd_scale(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
