//! Command-line workflows over the library: generate, allocate, plan, run,
//! bench and validate.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence or
//! plan failure. Every verb writes only to the paths given with `-o`, and
//! identical inputs give byte-identical outputs; wall-clock timings only
//! appear in `timings.csv` of `bench`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::alloc::{allocate, validate_allocation, AllocError, AllocParams, AllocatorKind, Allocation};
use crate::bench::{
    aggregates_csv, exp1, exp2, generate, run_experiment, run_metrics, runs_csv, timings_csv, Experiment, Report,
    ScenarioConfig, EXP1_SIZES, EXP2_SIZES,
};
use crate::domain::{Scenario, Violation};
use crate::geometry::Estimator;
use crate::netsim::GraphKind;
use crate::planner::{run_episode, validate_episode, Episode, EpisodeOptions};
use crate::scoring::ScoreParams;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Failure(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gcbha", version, about = "Grouped consensus auction and lifelong planning for warehouse fleets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario file.
    Gen(GenArgs),
    /// Allocate a scenario's tasks.
    Allocate(AllocateArgs),
    /// Plan and execute an allocation.
    Plan(PlanArgs),
    /// Allocate, plan and report metrics for a scenario.
    Run(RunArgs),
    /// Run an experiment matrix.
    Bench(BenchArgs),
    /// Check a scenario, allocation, paths, matrix or report file.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub tasks: Option<usize>,
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Scenario configuration JSON; missing fields take the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct AllocFlags {
    #[arg(long = "alloc", default_value = "gcbha", value_parser = parse_from_str::<AllocatorKind>)]
    pub allocator: AllocatorKind,
    #[arg(long, default_value_t = 50)]
    pub group_request: u32,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value = "warehouse", value_parser = parse_from_str::<Estimator>)]
    pub estimator: Estimator,
    #[arg(long, default_value = "full", value_parser = parse_from_str::<GraphKind>)]
    pub graph: GraphKind,
    /// Communication graph seed; defaults to the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub round_cap: Option<u64>,
}

impl AllocFlags {
    fn params(&self, scenario: &Scenario) -> AllocParams {
        AllocParams {
            allocator: self.allocator,
            request_group: self.group_request,
            score: ScoreParams { lambda: self.lambda, estimator: self.estimator, ..Default::default() },
            graph: self.graph,
            graph_seed: self.seed.unwrap_or(scenario.seed),
            round_cap: self.round_cap,
        }
    }
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    pub scenario: PathBuf,
    #[command(flatten)]
    pub alloc: AllocFlags,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    pub allocation: PathBuf,
    #[arg(long, value_enum, default_value = "on")]
    pub enforce_windows: OnOff,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    #[command(flatten)]
    pub alloc: AllocFlags,
    #[arg(long, value_enum, default_value = "on")]
    pub enforce_windows: OnOff,
    /// Output directory.
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Exp1,
    Exp2,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment matrix JSON.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    pub matrix: Option<PathBuf>,
    /// Built-in matrix over the standard problem sizes.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Repetitions per cell for a preset.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(short = 'o', long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    /// Allocation a paths file was planned from.
    #[arg(long)]
    pub against: Option<PathBuf>,
    /// Window setting the paths were planned with.
    #[arg(long, value_enum, default_value = "on")]
    pub enforce_windows: OnOff,
}

fn parse_from_str<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Allocate(a) => allocate_cmd(a),
        Command::Plan(a) => plan_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Validate(a) => validate_cmd(a),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn csv_bytes(r: Result<Vec<u8>, csv::Error>) -> Result<Vec<u8>, CliError> {
    r.map_err(|e| CliError::Data(e.to_string()))
}

fn report_violations(what: &str, violations: &[Violation]) -> Result<(), CliError> {
    if violations.is_empty() {
        return Ok(());
    }
    for v in violations {
        eprintln!("{v}");
    }
    Err(CliError::Data(format!("{what}: {} violation(s), first: {}", violations.len(), violations[0])))
}

fn gen(a: &GenArgs) -> Result<(), CliError> {
    let mut config: ScenarioConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ScenarioConfig::default(),
    };
    config.tasks = a.tasks.unwrap_or(config.tasks);
    config.agents = a.agents.unwrap_or(config.agents);
    let scenario = generate(&config, a.seed).map_err(|e| CliError::Data(e.to_string()))?;
    write_json(&a.output, &scenario)
}

fn allocate_scenario(path: &Path, flags: &AllocFlags) -> Result<Allocation, CliError> {
    let scenario: Scenario = read_json(path)?;
    allocate(&scenario, &flags.params(&scenario)).map_err(|e| match e {
        AllocError::Consensus(_) => CliError::Failure(e.to_string()),
        other => CliError::Data(other.to_string()),
    })
}

fn episode_for(alloc: &Allocation, windows: OnOff) -> Result<Episode, CliError> {
    let options = EpisodeOptions { enforce_windows: windows == OnOff::On, ..Default::default() };
    run_episode(alloc, &options).map_err(|e| CliError::Data(e.to_string()))
}

fn plan_failure(episode: &Episode) -> Result<(), CliError> {
    match episode.failures.first() {
        None => Ok(()),
        Some(f) => Err(CliError::Failure(format!(
            "{} leg(s) could not be planned; first: {} target {} at timestep {}",
            episode.failures.len(),
            f.agent_id,
            f.target_index,
            f.timestep
        ))),
    }
}

fn allocate_cmd(a: &AllocateArgs) -> Result<(), CliError> {
    let alloc = allocate_scenario(&a.scenario, &a.alloc)?;
    write_json(&a.output, &alloc)
}

fn plan_cmd(a: &PlanArgs) -> Result<(), CliError> {
    let alloc: Allocation = read_json(&a.allocation)?;
    report_violations("allocation", &validate_allocation(&alloc))?;
    let episode = episode_for(&alloc, a.enforce_windows)?;
    write_json(&a.output, &episode)?;
    plan_failure(&episode)
}

fn run_cmd(a: &RunArgs) -> Result<(), CliError> {
    let alloc = allocate_scenario(&a.scenario, &a.alloc)?;
    let dir = &a.output;
    write_json(&dir.join("allocation.json"), &alloc)?;
    let episode = episode_for(&alloc, a.enforce_windows)?;
    write_json(&dir.join("paths.json"), &episode)?;
    let metrics = run_metrics(&alloc, Some(&episode));
    write_json(&dir.join("metrics.json"), &metrics)?;
    write_bytes(&dir.join("metrics.csv"), &csv_bytes(runs_csv(std::slice::from_ref(&metrics)))?)?;
    plan_failure(&episode)
}

fn bench_cmd(a: &BenchArgs) -> Result<(), CliError> {
    let mut exp: Experiment = match (&a.matrix, a.preset) {
        (Some(p), _) => read_json(p)?,
        (None, Some(preset)) => {
            let base = ScenarioConfig::default();
            match preset {
                Preset::Exp1 => exp1(&base, &EXP1_SIZES),
                Preset::Exp2 => exp2(&base, &EXP2_SIZES),
            }
        }
        (None, None) => return Err(CliError::Usage("a matrix file or --preset is required".into())),
    };
    if let Some(r) = a.repetitions {
        exp.cells.iter_mut().for_each(|c| c.config.repetitions = r);
    }
    for cell in &exp.cells {
        cell.config.validate().map_err(|e| CliError::Data(format!("cell {}: {e}", cell.config.label())))?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Data(e.to_string()))?;
    let report = pool.install(|| run_experiment(&exp));
    let dir = &a.output;
    write_json(&dir.join("report.json"), &report)?;
    write_bytes(&dir.join("aggregates.csv"), &csv_bytes(aggregates_csv(&report.aggregates))?)?;
    write_bytes(&dir.join("runs.csv"), &csv_bytes(runs_csv(&report.runs))?)?;
    write_bytes(&dir.join("timings.csv"), &csv_bytes(timings_csv(&report.timings))?)?;
    let failed = report.runs.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see report.json", report.runs.len());
    }
    Ok(())
}

fn validate_cmd(a: &ValidateArgs) -> Result<(), CliError> {
    let value: serde_json::Value = read_json(&a.file)?;
    let kind = value.get("kind").and_then(|k| k.as_str()).map(str::to_owned);
    match kind.as_deref() {
        Some(Allocation::KIND) => {
            let alloc: Allocation = from_value(value, &a.file)?;
            report_violations("scenario", &alloc.scenario.validate())?;
            report_violations("allocation", &validate_allocation(&alloc))?;
        }
        Some(Episode::KIND) => {
            let episode: Episode = from_value(value, &a.file)?;
            let Some(against) = &a.against else {
                return Err(CliError::Usage("a paths file needs --against <allocation>".into()));
            };
            let alloc: Allocation = read_json(against)?;
            let windows = a.enforce_windows == OnOff::On;
            let v = validate_episode(&episode, &alloc.agents_by_id(), &alloc.queues, &alloc.scenario.layout, windows);
            report_violations("paths", &v)?;
        }
        Some(Report::KIND) => {
            let _: Report = from_value(value, &a.file)?;
        }
        Some(other) => return Err(CliError::Data(format!("{}: unknown artifact kind `{other}`", a.file.display()))),
        None if value.get("cells").is_some() => {
            let exp: Experiment = from_value(value, &a.file)?;
            for cell in &exp.cells {
                cell.config.validate().map_err(|e| CliError::Data(format!("cell {}: {e}", cell.config.label())))?;
            }
        }
        None => {
            let scenario: Scenario = from_value(value, &a.file)?;
            report_violations("scenario", &scenario.validate())?;
        }
    }
    println!("{}: ok", a.file.display());
    Ok(())
}

fn from_value<T: DeserializeOwned>(value: serde_json::Value, path: &Path) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
