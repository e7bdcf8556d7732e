//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 3 7`.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use gcbha::alloc::{allocate, validate_allocation, AllocParams, AllocatorKind, Allocation};
use gcbha::auction::{bid_value, build_bundle, release_from};
use gcbha::bench::{derive_seed, generate, AllocatorSpec, ScenarioConfig};
use gcbha::domain::{Agent, AgentId, BidState, CargoType, GridPoint, Scenario, Task, TaskId};
use gcbha::geometry::{bfs_distances, euclidean_cost, warehouse_cost, Estimator, Orientation, WarehouseLayout};
use gcbha::netsim::{default_round_cap, make_graph, run_consensus, GraphKind};
use gcbha::planner::{run_episode, validate_episode, EpisodeOptions};
use gcbha::scoring::{ScoreParams, Scorer};
use gcbha::taskprep::{decompose, group, identity_grouping, GroupingConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: impl Into<String>) -> Check {
    let detail = detail.into();
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Default scenario with the capacity limit lifted and every task worth
/// 100, the setting of the grouping trade-off figure.
fn tradeoff_config() -> ScenarioConfig {
    ScenarioConfig { capacity_limited: false, uniform_value: Some(100.0), ..ScenarioConfig::default() }.with_size(100, 20)
}

fn scorer_for(scenario: &Scenario, estimator: Estimator) -> Scorer {
    Scorer::new(ScoreParams { estimator, ..Default::default() }, scenario.layout.clone())
}

// 1 ----------------------------------------------------------------------

fn random_layout(r: &mut ChaCha8Rng, width: i32, height: i32) -> WarehouseLayout {
    loop {
        let l = WarehouseLayout::new(
            width,
            height,
            r.gen_range(2..=10),
            r.gen_range(1..=3),
            r.gen_range(1..=4),
            r.gen_range(1..=4),
            GridPoint::new(r.gen_range(1..=4), r.gen_range(1..=4)),
            if r.gen_bool(0.5) { Orientation::XAxis } else { Orientation::YAxis },
        );
        if l.is_valid() && l.shelf_columns() > 0 && l.shelf_rows() > 0 {
            return l;
        }
    }
}

struct PairStats {
    pairs: usize,
    exact: usize,
    warehouse_abs: f64,
    euclidean_abs: f64,
}

impl PairStats {
    fn new() -> Self {
        Self { pairs: 0, exact: 0, warehouse_abs: 0.0, euclidean_abs: 0.0 }
    }

    fn add(&mut self, a: GridPoint, b: GridPoint, truth: u32, layout: &WarehouseLayout) {
        let w = warehouse_cost(a, b, layout).expect("aisle endpoints");
        self.pairs += 1;
        self.exact += usize::from(w == truth);
        self.warehouse_abs += (f64::from(w) - f64::from(truth)).abs();
        self.euclidean_abs += (euclidean_cost(a, b) - f64::from(truth)).abs();
    }

    fn maes(&self) -> (f64, f64) {
        (self.warehouse_abs / self.pairs as f64, self.euclidean_abs / self.pairs as f64)
    }
}

fn estimator_exactness() -> Check {
    let mut r = rng(0xE571);
    let mut layouts = Vec::new();
    for _ in 0..10 {
        let (w, h) = (r.gen_range(12..=30), r.gen_range(12..=30));
        layouts.push((true, random_layout(&mut r, w, h)));
    }
    layouts.push((false, ScenarioConfig::default().layout()));
    for _ in 0..9 {
        let (w, h) = (r.gen_range(31..=80), r.gen_range(31..=80));
        layouts.push((false, random_layout(&mut r, w, h)));
    }
    let results: Vec<(bool, PairStats)> = layouts
        .par_iter()
        .enumerate()
        .map(|(k, (exhaustive, layout))| {
            let aisle = layout.aisle_cells();
            let mut stats = PairStats::new();
            if *exhaustive {
                for &a in &aisle {
                    let d = bfs_distances(a, layout);
                    for &b in &aisle {
                        stats.add(a, b, d[layout.index(b)].expect("connected aisles"), layout);
                    }
                }
            } else {
                let mut r = rng(k as u64);
                let mut by_source: BTreeMap<usize, Vec<GridPoint>> = BTreeMap::new();
                for _ in 0..10_000 {
                    by_source.entry(r.gen_range(0..aisle.len())).or_default().push(aisle[r.gen_range(0..aisle.len())]);
                }
                for (s, targets) in by_source {
                    let d = bfs_distances(aisle[s], layout);
                    for b in targets {
                        stats.add(aisle[s], b, d[layout.index(b)].expect("connected aisles"), layout);
                    }
                }
            }
            (*exhaustive, stats)
        })
        .collect();
    let mut worst_sampled = 1.0f64;
    let mut exhaustive_pairs = 0;
    for (k, (exhaustive, s)) in results.iter().enumerate() {
        let (wm, em) = s.maes();
        if *exhaustive && s.exact != s.pairs {
            return Err(format!("layout {k}: {} of {} exhaustive pairs differ from BFS", s.pairs - s.exact, s.pairs));
        }
        if *exhaustive {
            exhaustive_pairs += s.pairs;
        } else {
            worst_sampled = worst_sampled.min(s.exact as f64 / s.pairs as f64);
        }
        if wm >= em {
            return Err(format!("layout {k}: warehouse MAE {wm:.3} not below euclidean MAE {em:.3}"));
        }
    }
    ensure(
        worst_sampled >= 0.99,
        format!("{exhaustive_pairs} exhaustive pairs exact; worst sampled agreement {:.2}%", 100.0 * worst_sampled),
    )
}

// 2 ----------------------------------------------------------------------

fn consensus_convergence() -> Check {
    let sizes = [(20, 10), (50, 10), (50, 20), (100, 20), (100, 50)];
    let graphs = [GraphKind::Full, GraphKind::Ring, GraphKind::Random(0.3)];
    let specs = [AllocatorSpec::grouped(50), AllocatorSpec::grouped(100), AllocatorSpec::new(AllocatorKind::Cbga)];
    let mut jobs = Vec::new();
    for &(t, a) in &sizes {
        for g in graphs {
            for spec in specs {
                for rep in 0..10u64 {
                    jobs.push((t, a, g, spec, rep));
                }
            }
        }
    }
    let failures: Vec<String> = jobs
        .par_iter()
        .filter_map(|&(t, a, g, spec, rep)| {
            let config = ScenarioConfig::default().with_size(t, a);
            let seed = derive_seed(config.seed, rep);
            let tag = format!("{} t{t}_a{a} {g} rep {rep}", spec.label(&config));
            let s = generate(&config, seed).map_err(|e| format!("{tag}: {e}")).ok()?;
            let scorer = scorer_for(&s, Estimator::Warehouse);
            let tasks = decompose(&s.tasks, &s.agents).ok()?;
            let grouping = match spec.allocator {
                AllocatorKind::Gcbha => group(&tasks, GroupingConfig { request_group: spec.request_group.unwrap() }, scorer.cost_model()),
                _ => identity_grouping(&tasks),
            };
            let items = grouping.meta_tasks();
            let graph = make_graph(g, s.agents.len(), seed);
            if !graph.is_connected() {
                return Some(format!("{tag}: graph not connected"));
            }
            let cap = default_round_cap(s.agents.len(), items.len());
            let out = match run_consensus(&s.agents, &items, &graph, &scorer, None) {
                Ok(o) => o,
                Err(e) => return Some(format!("{tag}: {e}")),
            };
            if out.report.rounds_executed >= cap {
                return Some(format!("{tag}: reached the round cap"));
            }
            let first = &out.states[0];
            for st in &out.states[1..] {
                let same_y = st.y.iter().zip(&first.y).all(|(a, b)| a.to_bits() == b.to_bits());
                if !same_y || st.z != first.z {
                    return Some(format!("{tag}: agents {} and 0 disagree", st.agent));
                }
            }
            for j in 0..items.len() {
                let holders: Vec<usize> = out.states.iter().filter(|st| st.x[j]).map(|st| st.agent).collect();
                match first.z[j] {
                    Some(w) if holders != [w] => return Some(format!("{tag}: item {j} won by {w}, held by {holders:?}")),
                    None if !holders.is_empty() => return Some(format!("{tag}: unassigned item {j} held by {holders:?}")),
                    _ => {}
                }
            }
            None
        })
        .collect();
    ensure(failures.is_empty(), if failures.is_empty() { format!("{} runs converged", jobs.len()) } else { failures.join("; ") })
}

// 3 ----------------------------------------------------------------------

fn cbga_degeneracy() -> Check {
    let mut r = rng(0xCB6A);
    for k in 0..50u64 {
        let config = ScenarioConfig {
            width: r.gen_range(30..=60),
            height: r.gen_range(30..=60),
            tasks: r.gen_range(5..=40),
            agents: r.gen_range(2..=12),
            capacity_limited: r.gen_bool(0.7),
            ..ScenarioConfig::default()
        };
        let s = generate(&config, k).map_err(|e| e.to_string())?;
        let min_request = decompose(&s.tasks, &s.agents).map_err(|e| e.to_string())?.iter().map(|t| t.request).min().unwrap();
        let base = AllocParams { graph_seed: k, ..AllocParams::default() };
        let gcbha = allocate(&s, &AllocParams { allocator: AllocatorKind::Gcbha, request_group: 2 * min_request - 1, ..base })
            .map_err(|e| e.to_string())?;
        let cbga = allocate(&s, &AllocParams { allocator: AllocatorKind::Cbga, ..base }).map_err(|e| e.to_string())?;
        let a = serde_json::to_vec(&gcbha.queues).unwrap();
        let b = serde_json::to_vec(&cbga.queues).unwrap();
        if a != b {
            return Err(format!("scenario {k}: queues differ"));
        }
    }
    Ok("50 scenarios byte-identical".into())
}

// 4, 5 -------------------------------------------------------------------

struct Tradeoff {
    rounds: f64,
    seconds: f64,
    score: f64,
}

fn measure(spec: AllocatorSpec, config: &ScenarioConfig) -> Result<Tradeoff, String> {
    let (mut rounds, mut seconds, mut score) = (0.0, 0.0, 0.0);
    for rep in 0..10u64 {
        let seed = derive_seed(config.seed, rep);
        let s = generate(config, seed).map_err(|e| e.to_string())?;
        let params = spec.params(config, GraphKind::Full, seed);
        let mut best = Duration::MAX;
        let mut out: Option<Allocation> = None;
        for _ in 0..3 {
            let started = Instant::now();
            let a = allocate(&s, &params).map_err(|e| e.to_string())?;
            best = best.min(started.elapsed());
            out = Some(a);
        }
        let a = out.unwrap();
        rounds += a.consensus.map_or(0, |c| c.rounds) as f64;
        seconds += best.as_secs_f64();
        score += a.score;
    }
    Ok(Tradeoff { rounds: rounds / 10.0, seconds: seconds / 10.0, score: score / 10.0 })
}

fn tradeoff_cells() -> Result<[Tradeoff; 3], String> {
    let config = tradeoff_config();
    Ok([
        measure(AllocatorSpec::grouped(100), &config)?,
        measure(AllocatorSpec::grouped(50), &config)?,
        measure(AllocatorSpec::new(AllocatorKind::Cbga), &config)?,
    ])
}

fn grouping_speedup() -> Check {
    let [g100, g50, cbga] = tradeoff_cells()?;
    let ratio = cbga.rounds / g50.rounds;
    let detail = format!(
        "rounds {:.1} / {:.1} / {:.1}, ms {:.2} / {:.2} / {:.2} (GCBHA(100) / GCBHA(50) / CBGA), round ratio {ratio:.2}",
        g100.rounds,
        g50.rounds,
        cbga.rounds,
        1e3 * g100.seconds,
        1e3 * g50.seconds,
        1e3 * cbga.seconds
    );
    let rounds_ok = g100.rounds <= g50.rounds && g50.rounds <= cbga.rounds;
    let time_ok = g100.seconds <= g50.seconds && g50.seconds <= cbga.seconds;
    ensure(rounds_ok && time_ok && ratio >= 1.2, detail)
}

fn score_tradeoff() -> Check {
    let config = tradeoff_config();
    let g50 = measure(AllocatorSpec::grouped(50), &config)?;
    let cbga = measure(AllocatorSpec::new(AllocatorKind::Cbga), &config)?;
    let ratio = g50.score / cbga.score;
    ensure(ratio >= 0.75, format!("GCBHA(50) {:.1} vs CBGA {:.1}, ratio {ratio:.3}", g50.score, cbga.score))
}

// 6 ----------------------------------------------------------------------

fn invariant_suite() -> Check {
    let failures: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|k| invariants_on(k).err().map(|e| format!("scenario {k}: {e}")))
        .collect();
    ensure(failures.is_empty(), if failures.is_empty() { "200 scenarios clean".to_string() } else { failures.join("; ") })
}

fn invariants_on(k: u64) -> Result<(), String> {
    let mut r = rng(0x1417 + k);
    let config = ScenarioConfig {
        width: r.gen_range(30..=50),
        height: r.gen_range(30..=50),
        tasks: r.gen_range(5..=30),
        agents: r.gen_range(2..=10),
        capacity_limited: r.gen_bool(0.8),
        ..ScenarioConfig::default()
    };
    let s = generate(&config, k).map_err(|e| e.to_string())?;
    let scorer = scorer_for(&s, Estimator::Warehouse);

    let tasks = decompose(&s.tasks, &s.agents).map_err(|e| e.to_string())?;
    let original: BTreeMap<TaskId, u32> = s.tasks.iter().map(|t| (t.id, t.request)).collect();
    let total_in: u64 = original.values().map(|&r| u64::from(r)).sum();
    let total_out: u64 = tasks.iter().map(|t| u64::from(t.request)).sum();
    if total_in != total_out {
        return Err(format!("decomposition changed demand {total_in} -> {total_out}"));
    }
    let min_cap = s.agents.iter().map(|a| a.capacity).min().unwrap();
    if let Some(t) = tasks.iter().find(|t| t.request > min_cap && original.get(&t.id) != Some(&t.request)) {
        return Err(format!("chunk {} exceeds the smallest capacity", t.id));
    }

    let cap = [20, 50, 100][r.gen_range(0..3)];
    let grouping = group(&tasks, GroupingConfig { request_group: cap }, scorer.cost_model());
    let mut seen: Vec<TaskId> = grouping.groups.iter().flat_map(|g| g.member_ids.clone()).collect();
    seen.sort();
    let mut ids: Vec<TaskId> = tasks.iter().map(|t| t.id).collect();
    ids.sort();
    if seen != ids {
        return Err("grouping is not a partition".into());
    }
    let by_id: BTreeMap<TaskId, &Task> = tasks.iter().map(|t| (t.id, t)).collect();
    for g in &grouping.groups {
        let members: Vec<&Task> = g.member_ids.iter().map(|id| by_id[id]).collect();
        let demand: u32 = members.iter().map(|t| t.request).sum();
        if members.len() > 1 && demand > cap {
            return Err(format!("group {} demand {demand} over cap {cap}", g.group_id));
        }
        if members.iter().any(|t| t.cargo_type != members[0].cargo_type) {
            return Err(format!("group {} mixes cargo types", g.group_id));
        }
    }

    let params = AllocParams { request_group: cap, graph_seed: k, ..AllocParams::default() };
    let alloc = allocate(&s, &params).map_err(|e| e.to_string())?;
    let agents: BTreeMap<AgentId, &Agent> = s.agents.iter().map(|a| (a.id, a)).collect();
    let alloc_tasks: BTreeMap<TaskId, &Task> = alloc.tasks.iter().map(|t| (t.id, t)).collect();
    for q in &alloc.queues {
        let load: u32 = q.task_ids().iter().map(|id| alloc_tasks[id].request).sum();
        if load > agents[&q.agent_id].capacity {
            return Err(format!("{} carries {load} over capacity", q.agent_id));
        }
        if !q.precedence_violations().is_empty() {
            return Err(format!("{} breaks pickup-before-delivery", q.agent_id));
        }
    }
    if let Some(v) = validate_allocation(&alloc).first() {
        return Err(v.to_string());
    }

    let items = grouping.meta_tasks();
    for (i, a) in s.agents.iter().enumerate() {
        let mut st = BidState::new(i, s.agents.len(), items.len());
        build_bundle(&mut st, a, &items, &scorer);
        if st.bundle.is_empty() {
            continue;
        }
        let cut = r.gen_range(0..st.bundle.len());
        let item = st.bundle[cut];
        release_from(&mut st, item, &items);
        let mut path: Vec<usize> = Vec::new();
        for &b in &st.bundle {
            let refs: Vec<&Task> = path.iter().map(|&j| &items[j]).collect();
            let c = scorer.best_insertion(a, &items[b], &refs).ok_or("kept item no longer fits")?;
            if bid_value(c.marginal) != st.y[b] {
                return Err(format!("bid of item {b} differs after release"));
            }
            path.insert(c.index, b);
        }
        if path != st.path {
            return Err("path differs after release".into());
        }
    }

    let episode = run_episode(&alloc, &EpisodeOptions::default()).map_err(|e| e.to_string())?;
    let v = validate_episode(&episode, &alloc.agents_by_id(), &alloc.queues, &s.layout, true);
    match v.first() {
        Some(v) => Err(format!("planner: {v}")),
        None => Ok(()),
    }
}

// 7 ----------------------------------------------------------------------

fn insertion_oracle() -> Check {
    let layout = WarehouseLayout::new(30, 30, 6, 2, 3, 3, GridPoint::new(2, 2), Orientation::XAxis);
    let aisle = layout.aisle_cells();
    let scorer = Scorer::new(ScoreParams::default(), layout.clone());
    let mut r = rng(0x1B5);
    let mut chosen = 0;
    for case in 0..1000 {
        let mut pick = || aisle[r.gen_range(0..aisle.len())];
        let agent = Agent {
            id: AgentId(0),
            position: pick(),
            capacity: 1000,
            cargo_type: CargoType::GENERAL,
            velocity: if case % 3 == 0 { 2.0 } else { 1.0 },
        };
        let n = case % 4;
        let mut tasks: Vec<Task> = (0..=n)
            .map(|j| {
                let start = r.gen_range(0.0..60.0);
                Task {
                    id: TaskId(j as u32),
                    position_start: aisle[r.gen_range(0..aisle.len())],
                    position_end: aisle[r.gen_range(0..aisle.len())],
                    time_start: start,
                    time_end: start + r.gen_range(40.0..400.0),
                    request: 10,
                    cargo_type: CargoType::GENERAL,
                    value: r.gen_range(1.0..20.0),
                }
            })
            .collect();
        let new = tasks.pop().unwrap();
        let bundle: Vec<&Task> = tasks.iter().collect();

        let total = |order: &[&Task]| -> Option<f64> {
            let mut end_pos = agent.position;
            let mut end_time = 0.0;
            let mut acc = 0.0;
            for t in order {
                let pickup = (end_time + scorer.cost(end_pos, t.position_start) / agent.velocity).max(t.time_start);
                let done = pickup + scorer.cost(t.position_start, t.position_end) / agent.velocity;
                let slack = t.time_end - done;
                if slack < 0.0 {
                    return None;
                }
                acc += t.value * (-0.1 * pickup).exp() * (0.1 * slack).ln_1p();
                end_pos = t.position_end;
                end_time = done;
            }
            Some(acc)
        };
        let expected = total(&bundle).and_then(|before| {
            let mut best: Option<(usize, f64)> = None;
            for index in 0..=bundle.len() {
                let mut order = bundle.clone();
                order.insert(index, &new);
                if let Some(t) = total(&order) {
                    if best.is_none_or(|(_, b)| t > b) {
                        best = Some((index, t));
                    }
                }
            }
            best.map(|(index, t)| (index, t - before))
        });
        let got = scorer.best_insertion(&agent, &new, &bundle).map(|c| (c.index, c.marginal));
        if expected != got {
            return Err(format!("case {case}: expected {expected:?}, got {got:?}"));
        }
        chosen += usize::from(got.is_some());
    }
    ensure(chosen >= 500, format!("1000 cases match ({chosen} with a feasible insertion)"))
}

// 8 ----------------------------------------------------------------------

fn prediction_gap() -> Check {
    let config = ScenarioConfig::default().with_size(50, 20);
    let mean_gap = |spec: AllocatorSpec| -> Result<f64, String> {
        let gaps: Vec<Result<f64, String>> = (0..10u64)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(config.seed, rep);
                let s = generate(&config, seed).map_err(|e| e.to_string())?;
                let a = allocate(&s, &spec.params(&config, GraphKind::Full, seed)).map_err(|e| e.to_string())?;
                let ep = run_episode(&a, &EpisodeOptions::default()).map_err(|e| e.to_string())?;
                Ok(ep.agents.iter().zip(&a.predicted_lengths).map(|(run, p)| (run.length as f64 - p).abs()).sum())
            })
            .collect();
        let gaps = gaps.into_iter().collect::<Result<Vec<f64>, String>>()?;
        Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
    };
    let mut parts = Vec::new();
    let mut ok = true;
    for spec in [AllocatorSpec::grouped(50), AllocatorSpec::new(AllocatorKind::Cbga)] {
        let w = mean_gap(spec)?;
        let e = mean_gap(spec.with_estimator(Estimator::Euclidean))?;
        ok &= w < e;
        parts.push(format!("{} warehouse {w:.1} vs euclidean {e:.1}", spec.label(&config)));
    }
    ensure(ok, parts.join("; "))
}

// 9 ----------------------------------------------------------------------

fn lifelong_protocol() -> Check {
    let specs = [AllocatorSpec::grouped(50), AllocatorSpec::new(AllocatorKind::Cbga), AllocatorSpec::new(AllocatorKind::TaPriority)];
    let results: Vec<Result<(usize, usize, usize), String>> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let size = [(20, 10), (50, 20), (100, 20)][k as usize % 3];
            let config = ScenarioConfig::default().with_size(size.0, size.1);
            let seed = derive_seed(config.seed, k);
            let s = generate(&config, seed).map_err(|e| e.to_string())?;
            let spec = specs[k as usize % specs.len()];
            let a = allocate(&s, &spec.params(&config, GraphKind::Full, seed)).map_err(|e| e.to_string())?;
            let ep = run_episode(&a, &EpisodeOptions::default()).map_err(|e| e.to_string())?;
            let v = validate_episode(&ep, &a.agents_by_id(), &a.queues, &s.layout, true);
            if ep.replans > ep.targets {
                return Err(format!("episode {k}: {} replans for {} targets", ep.replans, ep.targets));
            }
            if let Some(v) = v.first() {
                return Err(format!("episode {k}: {v}"));
            }
            Ok((ep.replans, ep.targets, ep.failures.len()))
        })
        .collect();
    let mut totals = (0, 0, 0);
    for r in results {
        let (p, t, f) = r?;
        totals = (totals.0 + p, totals.1 + t, totals.2 + f);
    }
    Ok(format!("50 episodes collision-free; {} replans for {} targets; {} unplannable legs", totals.0, totals.1, totals.2))
}

// 10 ---------------------------------------------------------------------

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_gcbha");
    let scenario = dir.path().join("s.json");
    let status = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned()).map(|_| ())
    };
    status(&["gen", "--tasks", "50", "--agents", "20", "--seed", "7", "-o", scenario.to_str().unwrap()])?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        status(&["run", "--alloc", "gcbha", "--group-request", "50", scenario.to_str().unwrap(), "-o", out.to_str().unwrap()])?;
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(&out).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            files.insert(path.file_name().unwrap().to_owned(), std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        outputs.push(files);
    }
    ensure(outputs[0] == outputs[1] && outputs[0].len() >= 4, format!("{} output files byte-identical", outputs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("estimator exactness", estimator_exactness),
        ("consensus convergence", consensus_convergence),
        ("CBGA degeneracy equivalence", cbga_degeneracy),
        ("grouping speedup trend", grouping_speedup),
        ("score trade-off bound", score_tradeoff),
        ("invariant suite", invariant_suite),
        ("marginal-gain oracle", insertion_oracle),
        ("prediction-gap trend", prediction_gap),
        ("lifelong protocol", lifelong_protocol),
        ("determinism", determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let number = k + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let started = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {number:>2} {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {number:>2} {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
