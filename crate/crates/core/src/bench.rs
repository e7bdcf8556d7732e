//! Scenario generation, experiment orchestration and reports.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc::{allocate, AllocParams, AllocatorKind, Allocation};
use crate::domain::{Agent, AgentId, CargoType, GridPoint, Scenario, Task, TaskId};
use crate::geometry::{bfs_distances, Estimator, Orientation, WarehouseLayout};
use crate::netsim::GraphKind;
use crate::planner::{run_episode, Episode, EpisodeOptions};
use crate::scoring::ScoreParams;

/// Parameters of a randomly generated scenario family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub width: i32,
    pub height: i32,
    pub shelf_length: i32,
    pub shelf_depth: i32,
    pub gap_w: i32,
    pub gap_h: i32,
    pub origin: GridPoint,
    pub orientation: Orientation,
    pub tasks: usize,
    pub agents: usize,
    pub small_speed: f64,
    pub large_speed: f64,
    pub small_capacity: u32,
    pub large_capacity: u32,
    pub large_agent_fraction: f64,
    /// Inclusive request range of general tasks.
    pub request_range: (u32, u32),
    /// Inclusive request range of large tasks.
    pub large_request_range: (u32, u32),
    pub large_task_fraction: f64,
    pub special_task_fraction: f64,
    /// Fraction of agents carrying the special cargo type; at least one when
    /// any special task exists.
    pub special_agent_fraction: f64,
    pub request_group: u32,
    pub value_ratio: f64,
    pub lambda: f64,
    /// Window opening drawn uniformly from `[0, start_max]`.
    pub start_max: f64,
    /// Extra time beyond the direct trip, drawn uniformly from this range.
    pub slack_range: (f64, f64),
    /// When false every agent can carry all tasks at once.
    pub capacity_limited: bool,
    /// Overrides `value_ratio` with one value for every task.
    pub uniform_value: Option<f64>,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            width: 80,
            height: 80,
            shelf_length: 10,
            shelf_depth: 2,
            gap_w: 3,
            gap_h: 3,
            origin: GridPoint::new(3, 3),
            orientation: Orientation::XAxis,
            tasks: 50,
            agents: 20,
            small_speed: 1.0,
            large_speed: 2.0,
            small_capacity: 100,
            large_capacity: 200,
            large_agent_fraction: 0.1,
            request_range: (10, 50),
            large_request_range: (201, 300),
            large_task_fraction: 0.1,
            special_task_fraction: 0.1,
            special_agent_fraction: 0.1,
            request_group: 50,
            value_ratio: 0.1,
            lambda: 0.1,
            start_max: 50.0,
            slack_range: (200.0, 600.0),
            capacity_limited: true,
            uniform_value: None,
            seed: 1,
            repetitions: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("layout is invalid: {0}")]
    Layout(String),
    #[error("{agents} agents do not fit on {cells} aisle cells")]
    Crowded { agents: usize, cells: usize },
    #[error("config is invalid: {0}")]
    Config(String),
}

impl ScenarioConfig {
    pub fn layout(&self) -> WarehouseLayout {
        WarehouseLayout::new(
            self.width,
            self.height,
            self.shelf_length,
            self.shelf_depth,
            self.gap_w,
            self.gap_h,
            self.origin,
            self.orientation,
        )
    }

    pub fn with_size(mut self, tasks: usize, agents: usize) -> Self {
        self.tasks = tasks;
        self.agents = agents;
        self
    }

    /// Short label such as `t50_a20`.
    pub fn label(&self) -> String {
        format!("t{}_a{}", self.tasks, self.agents)
    }

    /// Rejects configurations `generate` cannot realize.
    pub fn validate(&self) -> Result<(), BenchError> {
        self.layout().validate().map_err(|e| BenchError::Layout(e.to_string()))?;
        let fractions = [self.large_agent_fraction, self.large_task_fraction, self.special_task_fraction, self.special_agent_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(BenchError::Config("fractions must lie in [0, 1]".into()));
        }
        if self.request_range.0 == 0 || self.request_range.0 > self.request_range.1 {
            return Err(BenchError::Config("bad request range".into()));
        }
        if self.large_request_range.0 > self.large_request_range.1 {
            return Err(BenchError::Config("bad large request range".into()));
        }
        if self.slack_range.0 > self.slack_range.1 || self.slack_range.0 < 0.0 || self.start_max < 0.0 {
            return Err(BenchError::Config("bad time window parameters".into()));
        }
        if self.agents == 0 {
            return Err(BenchError::Config("at least one agent is required".into()));
        }
        Ok(())
    }
}

/// Seed of repetition `rep` derived from `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, rep: u64) -> u64 {
    let mut z = base.wrapping_add(rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Builds a deterministic scenario for `seed`.
///
/// Pickups lie on aisle cells next to shelves, deliveries on the two side
/// lines, and agents on distinct aisle cells. Special agents are small; the
/// large-agent fraction applies to the general fleet.
pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<Scenario, BenchError> {
    config.validate()?;
    let layout = config.layout();
    let aisle = layout.aisle_cells();
    if config.agents > aisle.len() {
        return Err(BenchError::Crowded { agents: config.agents, cells: aisle.len() });
    }
    let deliveries = layout.delivery_cells();
    let pickups: Vec<GridPoint> = layout.pickup_cells().into_iter().filter(|p| !deliveries.contains(p)).collect();

    let n_large_tasks = count(config.large_task_fraction, config.tasks);
    let n_special_tasks = count(config.special_task_fraction, config.tasks).min(config.tasks - n_large_tasks);
    let mut n_special_agents = count(config.special_agent_fraction, config.agents);
    if n_special_tasks > 0 {
        n_special_agents = n_special_agents.max(1);
    }
    n_special_agents = n_special_agents.min(config.agents);
    let n_large_agents = count(config.large_agent_fraction, config.agents).min(config.agents - n_special_agents);

    let mut agent_rng = rng(seed, 1);
    let mut spots = aisle.clone();
    spots.shuffle(&mut agent_rng);
    let unlimited = config.tasks as u32 * config.large_request_range.1.max(config.request_range.1);
    let mut agents = Vec::with_capacity(config.agents);
    for k in 0..config.agents {
        let (cargo_type, large) = if k < n_special_agents {
            (CargoType::SPECIAL, false)
        } else {
            (CargoType::GENERAL, k < n_special_agents + n_large_agents)
        };
        agents.push(Agent {
            id: AgentId(k as u32),
            position: spots[k],
            capacity: if !config.capacity_limited {
                unlimited.max(1)
            } else if large {
                config.large_capacity
            } else {
                config.small_capacity
            },
            cargo_type,
            velocity: if large { config.large_speed } else { config.small_speed },
        });
    }

    let mut task_rng = rng(seed, 2);
    let mut kinds: Vec<u8> = (0..config.tasks)
        .map(|k| if k < n_large_tasks { 2 } else if k < n_large_tasks + n_special_tasks { 1 } else { 0 })
        .collect();
    kinds.shuffle(&mut task_rng);
    let mut tasks = Vec::with_capacity(config.tasks);
    for (k, kind) in kinds.into_iter().enumerate() {
        let position_start = *pickups.choose(&mut task_rng).expect("layout has pickup cells");
        let position_end = *deliveries.choose(&mut task_rng).expect("layout has delivery cells");
        let request = if kind == 2 {
            task_rng.gen_range(config.large_request_range.0..=config.large_request_range.1)
        } else {
            task_rng.gen_range(config.request_range.0..=config.request_range.1)
        };
        let direct = bfs_distances(position_start, &layout)[layout.index(position_end)].unwrap_or(0) as f64;
        let time_start = task_rng.gen_range(0.0..=config.start_max);
        let slack = task_rng.gen_range(config.slack_range.0..=config.slack_range.1);
        tasks.push(Task {
            id: TaskId(k as u32),
            position_start,
            position_end,
            time_start,
            time_end: time_start + direct / config.small_speed + slack,
            request,
            cargo_type: if kind == 1 { CargoType::SPECIAL } else { CargoType::GENERAL },
            value: config.uniform_value.unwrap_or(config.value_ratio * f64::from(request)),
        });
    }
    Ok(Scenario { layout, agents, tasks, seed })
}

/// One allocator configuration in an experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocatorSpec {
    pub allocator: AllocatorKind,
    #[serde(default)]
    pub request_group: Option<u32>,
    #[serde(default)]
    pub estimator: Option<Estimator>,
}

impl AllocatorSpec {
    pub fn new(allocator: AllocatorKind) -> Self {
        Self { allocator, request_group: None, estimator: None }
    }

    pub fn grouped(request_group: u32) -> Self {
        Self { allocator: AllocatorKind::Gcbha, request_group: Some(request_group), estimator: None }
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = Some(estimator);
        self
    }

    /// Label such as `GCBHA(50)` or `CBGA[euclidean]`.
    pub fn label(&self, config: &ScenarioConfig) -> String {
        let mut s = self.allocator.label().to_string();
        if self.allocator == AllocatorKind::Gcbha {
            s = format!("{s}({})", self.request_group.unwrap_or(config.request_group));
        }
        if let Some(e) = self.estimator {
            s = format!("{s}[{e}]");
        }
        s
    }

    pub fn params(&self, config: &ScenarioConfig, graph: GraphKind, graph_seed: u64) -> AllocParams {
        AllocParams {
            allocator: self.allocator,
            request_group: self.request_group.unwrap_or(config.request_group),
            score: ScoreParams { lambda: config.lambda, estimator: self.estimator.unwrap_or(Estimator::Warehouse), ..Default::default() },
            graph,
            graph_seed,
            round_cap: None,
        }
    }
}

/// A cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub spec: AllocatorSpec,
    pub config: ScenarioConfig,
}

/// An experiment: cells plus run-wide options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub name: String,
    pub cells: Vec<MatrixCell>,
    #[serde(default)]
    pub graph: GraphKind,
    /// Plan paths for every run; allocation-only experiments skip this.
    #[serde(default = "default_true")]
    pub plan: bool,
    #[serde(default = "default_true")]
    pub enforce_windows: bool,
}

fn default_true() -> bool {
    true
}

/// Deterministic metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub allocator: String,
    pub config: String,
    pub repetition: usize,
    pub seed: u64,
    pub rounds: u64,
    pub messages: u64,
    pub score: f64,
    pub predicted_length: f64,
    pub actual_length: Option<f64>,
    pub prediction_gap: Option<f64>,
    pub abs_prediction_gap: Option<f64>,
    pub makespan: Option<u64>,
    pub replans: Option<usize>,
    pub plan_failures: Option<usize>,
    pub unassigned: usize,
    pub late_tasks: usize,
    pub error: Option<String>,
}

/// Wall-clock timings of one run, kept apart from [`RunMetrics`] so that
/// metric reports are byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub allocator: String,
    pub config: String,
    pub repetition: usize,
    pub allocation_seconds: f64,
    pub planning_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub metrics: RunMetrics,
    pub timing: RunTiming,
}

/// Runs one (spec, config, repetition) combination.
pub fn run_once(cell: &MatrixCell, repetition: usize, graph: GraphKind, plan: bool, enforce_windows: bool) -> RunRecord {
    let seed = derive_seed(cell.config.seed, repetition as u64);
    let allocator = cell.spec.label(&cell.config);
    let config_label = cell.config.label();
    let mut metrics = RunMetrics {
        allocator: allocator.clone(),
        config: config_label.clone(),
        repetition,
        seed,
        rounds: 0,
        messages: 0,
        score: 0.0,
        predicted_length: 0.0,
        actual_length: None,
        prediction_gap: None,
        abs_prediction_gap: None,
        makespan: None,
        replans: None,
        plan_failures: None,
        unassigned: 0,
        late_tasks: 0,
        error: None,
    };
    let mut timing = RunTiming { allocator, config: config_label, repetition, allocation_seconds: 0.0, planning_seconds: 0.0 };
    let scenario = match generate(&cell.config, seed) {
        Ok(s) => s,
        Err(e) => {
            metrics.error = Some(e.to_string());
            return RunRecord { metrics, timing };
        }
    };
    let params = cell.spec.params(&cell.config, graph, seed);
    let started = Instant::now();
    let alloc = allocate(&scenario, &params);
    timing.allocation_seconds = started.elapsed().as_secs_f64();
    let alloc = match alloc {
        Ok(a) => a,
        Err(e) => {
            metrics.error = Some(e.to_string());
            return RunRecord { metrics, timing };
        }
    };
    let episode = plan.then(|| {
        let started = Instant::now();
        let ep = run_episode(&alloc, &EpisodeOptions { enforce_windows, ..Default::default() });
        timing.planning_seconds = started.elapsed().as_secs_f64();
        ep
    });
    match episode {
        Some(Err(e)) => {
            fill_allocation_metrics(&mut metrics, &alloc, None);
            metrics.error = Some(e.to_string());
        }
        Some(Ok(ep)) => fill_allocation_metrics(&mut metrics, &alloc, Some(&ep)),
        None => fill_allocation_metrics(&mut metrics, &alloc, None),
    }
    RunRecord { metrics, timing }
}

/// Metrics of one allocation and, when planned, its episode. Labels follow
/// the report conventions; the repetition is 0 and the seed the scenario's.
pub fn run_metrics(alloc: &Allocation, episode: Option<&Episode>) -> RunMetrics {
    let p = &alloc.params;
    let mut spec = AllocatorSpec { allocator: p.allocator, request_group: Some(p.request_group), estimator: None };
    if p.score.estimator != Estimator::Warehouse {
        spec = spec.with_estimator(p.score.estimator);
    }
    let mut m = RunMetrics {
        allocator: spec.label(&ScenarioConfig::default()),
        config: format!("t{}_a{}", alloc.scenario.tasks.len(), alloc.scenario.agents.len()),
        repetition: 0,
        seed: alloc.scenario.seed,
        rounds: 0,
        messages: 0,
        score: 0.0,
        predicted_length: 0.0,
        actual_length: None,
        prediction_gap: None,
        abs_prediction_gap: None,
        makespan: None,
        replans: None,
        plan_failures: None,
        unassigned: 0,
        late_tasks: 0,
        error: None,
    };
    fill_allocation_metrics(&mut m, alloc, episode);
    m
}

fn fill_allocation_metrics(m: &mut RunMetrics, alloc: &Allocation, episode: Option<&Episode>) {
    if let Some(c) = &alloc.consensus {
        m.rounds = c.rounds;
        m.messages = c.messages;
    }
    m.score = alloc.score;
    m.predicted_length = alloc.predicted_total;
    m.unassigned = alloc.unassigned.len();
    m.late_tasks = alloc.late_tasks;
    if let Some(ep) = episode {
        let actual = ep.total_length as f64;
        m.actual_length = Some(actual);
        m.prediction_gap = Some(actual - alloc.predicted_total);
        m.abs_prediction_gap =
            Some(ep.agents.iter().zip(&alloc.predicted_lengths).map(|(a, p)| (a.length as f64 - p).abs()).sum());
        m.makespan = Some(ep.makespan);
        m.replans = Some(ep.replans);
        m.plan_failures = Some(ep.failures.len());
    }
}

/// CSV of run metrics, one row per run.
pub fn runs_csv(runs: &[RunMetrics]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in runs {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Mean and sample standard deviation of one metric over a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub allocator: String,
    pub config: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Full experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub name: String,
    pub runs: Vec<RunMetrics>,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip)]
    pub timings: Vec<RunTiming>,
}

impl Report {
    pub const KIND: &'static str = "report";
}

/// Runs every cell for its configured repetitions on the current rayon
/// pool. Failures are recorded per run; the matrix continues.
pub fn run_experiment(exp: &Experiment) -> Report {
    let jobs: Vec<(usize, usize)> =
        exp.cells.iter().enumerate().flat_map(|(c, cell)| (0..cell.config.repetitions).map(move |r| (c, r))).collect();
    let records: Vec<RunRecord> =
        jobs.par_iter().map(|&(c, r)| run_once(&exp.cells[c], r, exp.graph, exp.plan, exp.enforce_windows)).collect();
    let mut runs = Vec::with_capacity(records.len());
    let mut timings = Vec::with_capacity(records.len());
    for r in records {
        runs.push(r.metrics);
        timings.push(r.timing);
    }
    let aggregates = aggregate(&exp.cells, &runs);
    Report { kind: Report::KIND.to_string(), name: exp.name.clone(), runs, aggregates, timings }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Metric columns aggregated per cell, in report order.
pub const METRICS: [&str; 13] = [
    "rounds",
    "messages",
    "score",
    "predicted_length",
    "actual_length",
    "prediction_gap",
    "abs_prediction_gap",
    "makespan",
    "replans",
    "plan_failures",
    "unassigned",
    "late_tasks",
    "failures",
];

fn metric_values(name: &str, runs: &[&RunMetrics]) -> Vec<f64> {
    let ok = runs.iter().filter(|r| r.error.is_none());
    match name {
        "rounds" => ok.map(|r| r.rounds as f64).collect(),
        "messages" => ok.map(|r| r.messages as f64).collect(),
        "score" => ok.map(|r| r.score).collect(),
        "predicted_length" => ok.map(|r| r.predicted_length).collect(),
        "actual_length" => ok.filter_map(|r| r.actual_length).collect(),
        "prediction_gap" => ok.filter_map(|r| r.prediction_gap).collect(),
        "abs_prediction_gap" => ok.filter_map(|r| r.abs_prediction_gap).collect(),
        "makespan" => ok.filter_map(|r| r.makespan.map(|m| m as f64)).collect(),
        "replans" => ok.filter_map(|r| r.replans.map(|m| m as f64)).collect(),
        "plan_failures" => ok.filter_map(|r| r.plan_failures.map(|m| m as f64)).collect(),
        "unassigned" => ok.map(|r| r.unassigned as f64).collect(),
        "late_tasks" => ok.map(|r| r.late_tasks as f64).collect(),
        "failures" => vec![runs.iter().filter(|r| r.error.is_some()).count() as f64],
        _ => Vec::new(),
    }
}

fn aggregate(cells: &[MatrixCell], runs: &[RunMetrics]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for cell in cells {
        let key = (cell.spec.label(&cell.config), cell.config.label());
        if !seen.insert(key.clone()) {
            continue;
        }
        let mine: Vec<&RunMetrics> = runs.iter().filter(|r| r.allocator == key.0 && r.config == key.1).collect();
        for metric in METRICS {
            let xs = metric_values(metric, &mine);
            if xs.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&xs);
            out.push(Aggregate { allocator: key.0.clone(), config: key.1.clone(), metric: metric.to_string(), mean, std, n: xs.len() });
        }
    }
    out
}

/// Mean allocation and planning seconds per cell.
pub fn timing_aggregates(timings: &[RunTiming]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(String, String), Vec<&RunTiming>> = BTreeMap::new();
    for t in timings {
        groups.entry((t.allocator.clone(), t.config.clone())).or_default().push(t);
    }
    let mut out = Vec::new();
    for ((allocator, config), ts) in groups {
        for (metric, xs) in [
            ("allocation_seconds", ts.iter().map(|t| t.allocation_seconds).collect::<Vec<_>>()),
            ("planning_seconds", ts.iter().map(|t| t.planning_seconds).collect::<Vec<_>>()),
        ] {
            let (mean, std) = mean_std(&xs);
            out.push(Aggregate { allocator: allocator.clone(), config: config.clone(), metric: metric.to_string(), mean, std, n: xs.len() });
        }
    }
    out
}

/// Problem sizes of the allocation experiment.
pub const EXP1_SIZES: [(usize, usize); 7] = [(20, 10), (50, 10), (50, 20), (100, 20), (100, 50), (200, 50), (200, 100)];
/// Problem sizes of the execution experiment.
pub const EXP2_SIZES: [(usize, usize); 6] = [(50, 20), (100, 20), (200, 20), (50, 50), (100, 50), (200, 50)];

/// Allocation-quality experiment: GCBHA(50), GCBHA(100), CBGA and CENTRAL
/// over the given sizes, without path planning.
pub fn exp1(base: &ScenarioConfig, sizes: &[(usize, usize)]) -> Experiment {
    let specs = [AllocatorSpec::grouped(50), AllocatorSpec::grouped(100), AllocatorSpec::new(AllocatorKind::Cbga), AllocatorSpec::new(AllocatorKind::Central)];
    matrix("exp1", base, sizes, &specs, false)
}

/// Execution experiment: every allocator with the warehouse estimator plus
/// the consensus allocators with the Euclidean estimator, with planning.
pub fn exp2(base: &ScenarioConfig, sizes: &[(usize, usize)]) -> Experiment {
    let specs = [
        AllocatorSpec::new(AllocatorKind::Central),
        AllocatorSpec::new(AllocatorKind::Cbga),
        AllocatorSpec::grouped(base.request_group),
        AllocatorSpec::new(AllocatorKind::TaPriority),
        AllocatorSpec::new(AllocatorKind::Cbga).with_estimator(Estimator::Euclidean),
        AllocatorSpec::grouped(base.request_group).with_estimator(Estimator::Euclidean),
    ];
    matrix("exp2", base, sizes, &specs, true)
}

fn matrix(name: &str, base: &ScenarioConfig, sizes: &[(usize, usize)], specs: &[AllocatorSpec], plan: bool) -> Experiment {
    let cells = sizes
        .iter()
        .flat_map(|&(t, a)| specs.iter().map(move |s| MatrixCell { spec: *s, config: base.clone().with_size(t, a) }))
        .collect();
    Experiment { name: name.to_string(), cells, graph: GraphKind::Full, plan, enforce_windows: true }
}

/// CSV with one row per (allocator, config, metric).
pub fn aggregates_csv(aggs: &[Aggregate]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for a in aggs {
        w.serialize(a)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// CSV with one row per run and timing column.
pub fn timings_csv(timings: &[RunTiming]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in timings {
        w.serialize(t)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}
