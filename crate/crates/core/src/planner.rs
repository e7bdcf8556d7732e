//! Prioritized time-expanded path planning and the lifelong replanning
//! protocol.
//!
//! Time is discrete. During step `t - 1 → t` an agent of velocity `v` makes
//! up to `v` unit moves; every cell it enters in that step is claimed at `t`,
//! together with the directed edges it crosses. Two agents conflict when
//! their claims at the same timestep share a cell or cross one edge in
//! opposite directions. An agent parked on a cell with no planned departure
//! holds a tail claim that blocks the cell for every later timestep.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc::Allocation;
use crate::domain::{Agent, AgentId, GridPoint, OrderedTargetQueue, Target, TargetKind, TaskId, Violation};
use crate::geometry::{bfs_on_raster, WarehouseLayout};

/// Consecutive planner retries an agent may spend on one leg.
pub const RETRY_CAP: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeOptions {
    /// Hold each pickup until its window opens.
    pub enforce_windows: bool,
    pub retry_cap: u32,
    /// Per-leg search horizon in timesteps; `None` means `4 (W + H)`.
    pub horizon: Option<u64>,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self { enforce_windows: true, retry_cap: RETRY_CAP, horizon: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("{0} queues for {1} agents")]
    Shape(usize, usize),
    #[error("queue of {agent} targets non-aisle cell {position}")]
    BadTarget { agent: AgentId, position: GridPoint },
    #[error("{0} starts on a non-aisle cell")]
    BadStart(AgentId),
    #[error("{0} and {1} share a start cell")]
    SharedStart(AgentId, AgentId),
    #[error("queue of {0} breaks pickup-before-delivery order")]
    Precedence(AgentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedStep {
    pub timestep: u64,
    pub position: GridPoint,
}

/// Every cell an agent occupies, in order. Entries sharing a timestep are
/// the cells entered during that step; a wait repeats the position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPath {
    pub agent_id: AgentId,
    pub steps: Vec<TimedStep>,
}

impl TimedPath {
    /// Unit moves made.
    pub fn length(&self) -> u64 {
        self.steps.windows(2).filter(|w| w[0].position != w[1].position).count() as u64
    }

    /// Last timestep on the floor.
    pub fn end(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.timestep)
    }

    /// Position at the end of timestep `t`, if on the floor.
    pub fn position_at(&self, t: u64) -> Option<GridPoint> {
        if t > self.end() {
            return None;
        }
        let k = self.steps.partition_point(|s| s.timestep <= t);
        Some(self.steps[k - 1].position)
    }
}

/// A target reached, with the timestep the agent left it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub task_id: TaskId,
    pub kind: TargetKind,
    pub arrived: u64,
    pub departed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFailure {
    pub agent_id: AgentId,
    /// Index of the unreachable target in the agent's queue.
    pub target_index: usize,
    pub timestep: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRun {
    pub agent_id: AgentId,
    pub path: TimedPath,
    pub length: u64,
    pub visits: Vec<Visit>,
    /// Sum over legs of the static shortest-path distance.
    pub lower_bound: u64,
    /// Arrival at the final target; `None` when the queue was not completed.
    pub finished: Option<u64>,
}

/// One lifelong replanning invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub timestep: u64,
    pub agent_id: AgentId,
    pub succeeded: bool,
    /// Remaining timesteps of every other agent still en route; the start of
    /// its own next leg is offset by this amount.
    pub offsets: Vec<(AgentId, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub kind: String,
    /// In ascending agent id order.
    pub agents: Vec<AgentRun>,
    pub total_length: u64,
    pub makespan: u64,
    /// Lifelong single-agent replans, excluding the initial plans.
    pub replans: usize,
    /// Arrivals whose next target was held by a parked agent; the search
    /// was postponed without running.
    #[serde(default)]
    pub deferrals: usize,
    pub initial_plans: usize,
    pub targets: usize,
    pub failures: Vec<PlanFailure>,
    #[serde(default, skip_serializing)]
    pub log: Vec<ReplanRecord>,
}

impl Episode {
    pub const KIND: &'static str = "paths";

    pub fn paths(&self) -> Vec<&TimedPath> {
        self.agents.iter().map(|a| &a.path).collect()
    }
}

/// Occupancy claims of committed paths.
#[derive(Debug, Clone, Default)]
pub struct ReservationTable {
    vertex: HashMap<(u64, u32), u32>,
    edge: HashSet<(u64, u32, u32)>,
    tail: HashMap<u32, (u32, u64)>,
    last: HashMap<u32, u64>,
    /// No claim starts after this timestep, so the table is static beyond it.
    settled: u64,
}

impl ReservationTable {
    fn claim(&mut self, t: u64, cell: u32, owner: u32) {
        self.vertex.insert((t, cell), owner);
        self.settled = self.settled.max(t);
        let last = self.last.entry(cell).or_insert(t);
        *last = (*last).max(t);
    }

    fn claim_edge(&mut self, t: u64, from: u32, to: u32) {
        self.edge.insert((t, from, to));
        self.settled = self.settled.max(t);
    }

    fn park(&mut self, cell: u32, owner: u32, from: u64) {
        self.tail.insert(cell, (owner, from));
        self.settled = self.settled.max(from);
    }

    /// Converts `owner`'s tail into vertex claims through `until`.
    fn unpark(&mut self, cell: u32, owner: u32, until: u64) {
        if let Some(&(o, from)) = self.tail.get(&cell) {
            if o != owner {
                return;
            }
            self.tail.remove(&cell);
            for t in from..=until {
                self.claim(t, cell, owner);
            }
        }
    }

    /// Whether `cell` is free for `me` at `t`.
    pub fn is_free(&self, t: u64, cell: u32, me: u32) -> bool {
        if self.vertex.get(&(t, cell)).is_some_and(|&o| o != me) {
            return false;
        }
        !self.tail.get(&cell).is_some_and(|&(o, from)| o != me && from <= t)
    }

    /// Whether crossing `from → to` during the step ending at `t` swaps with a
    /// claimed crossing.
    pub fn swaps(&self, t: u64, from: u32, to: u32) -> bool {
        self.edge.contains(&(t, to, from))
    }

    /// Whether `me` may stop at `cell` from `t` on indefinitely.
    pub fn can_park(&self, t: u64, cell: u32, me: u32) -> bool {
        if self.tail.get(&cell).is_some_and(|&(o, _)| o != me) {
            return false;
        }
        match self.last.get(&cell) {
            None => true,
            Some(&last) if last < t => true,
            // the latest claim may be our own from an earlier wait
            Some(_) => ((t)..=self.latest(cell)).all(|s| self.vertex.get(&(s, cell)).is_none_or(|&o| o == me)),
        }
    }

    fn latest(&self, cell: u32) -> u64 {
        self.last.get(&cell).copied().unwrap_or(0)
    }

    fn blocked_until(&self, cell: u32) -> u64 {
        self.last.get(&cell).map_or(0, |&l| l + 1)
    }
}

struct Leg {
    /// Cells per timestep after the start, each with the cells entered.
    steps: Vec<Vec<u32>>,
}

struct Searcher<'a> {
    layout: &'a WarehouseLayout,
    blocked: Vec<bool>,
    heuristics: HashMap<u32, Vec<u32>>,
}

impl<'a> Searcher<'a> {
    fn new(layout: &'a WarehouseLayout, blocked: Vec<bool>) -> Self {
        Self { layout, blocked, heuristics: HashMap::new() }
    }

    fn is_free_cell(&self, p: GridPoint) -> bool {
        self.layout.in_bounds(p) && !self.blocked[self.layout.index(p)]
    }

    fn neighbours(&self, cell: u32) -> impl Iterator<Item = u32> + '_ {
        let p = self.layout.point(cell as usize);
        p.neighbours().into_iter().filter_map(move |n| {
            let inside = n.x >= 0 && n.y >= 0 && n.x < self.layout.width && n.y < self.layout.height;
            (inside && !self.blocked[self.layout.index(n)]).then(|| self.layout.index(n) as u32)
        })
    }

    fn distances(&mut self, goal: u32) -> &Vec<u32> {
        let (layout, blocked) = (self.layout, &self.blocked);
        self.heuristics.entry(goal).or_insert_with(|| {
            bfs_on_raster(layout.point(goal as usize), layout, blocked).into_iter().map(|d| d.unwrap_or(u32::MAX)).collect()
        })
    }

    /// Every way to spend one step from `cell`: a wait, or `1..=v` unit moves
    /// without revisiting a cell, each listed by the cells entered.
    fn moves(&self, cell: u32, v: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![cell]];
        let mut stack = vec![vec![cell]];
        while let Some(seq) = stack.pop() {
            if seq.len() as u32 > v {
                continue;
            }
            let last = *seq.last().unwrap();
            for n in self.neighbours(last) {
                if seq.contains(&n) {
                    continue;
                }
                let mut next = seq.clone();
                next.push(n);
                out.push(next[1..].to_vec());
                stack.push(next);
            }
        }
        out
    }

    /// Whether `goal` is reachable from `start` avoiding cells other agents
    /// already hold indefinitely at `t0`; no timed path exists otherwise.
    fn reachable_around_tails(&self, start: u32, t0: u64, goal: u32, me: u32, table: &ReservationTable) -> bool {
        let mut blocked = self.blocked.clone();
        for (&cell, &(owner, from)) in &table.tail {
            if owner != me && from <= t0 {
                blocked[cell as usize] = true;
            }
        }
        let start_point = self.layout.point(start as usize);
        blocked[start as usize] = false;
        bfs_on_raster(start_point, self.layout, &blocked)[goal as usize].is_some()
    }

    /// Time-expanded A* from `(start, t0)` to a parkable `goal`.
    fn search(&mut self, start: u32, t0: u64, goal: u32, v: u32, me: u32, table: &ReservationTable, horizon: u64) -> Option<Leg> {
        if start == goal {
            return Some(Leg { steps: Vec::new() });
        }
        if table.tail.get(&goal).is_some_and(|&(o, _)| o != me) {
            return None;
        }
        let limit = t0 + horizon;
        let release = table.blocked_until(goal);
        if release > limit {
            return None;
        }
        let dist = self.distances(goal).clone();
        if dist[start as usize] == u32::MAX || !self.reachable_around_tails(start, t0, goal, me, table) {
            return None;
        }
        let h = |cell: u32, t: u64| -> u64 {
            let d = u64::from(dist[cell as usize]);
            d.div_ceil(u64::from(v)).max(release.saturating_sub(t))
        };
        let settled = table.settled.max(t0) + 1;
        let mut open = BinaryHeap::new();
        let mut parent: HashMap<(u32, u64), ((u32, u64), Vec<u32>)> = HashMap::new();
        let mut closed: HashSet<(u32, u64)> = HashSet::new();
        open.push(Reverse((t0 + h(start, t0), Reverse(t0), start)));
        while let Some(Reverse((_, Reverse(t), cell))) = open.pop() {
            // past `settled` an earlier visit to the same cell dominates
            if !closed.insert((cell, t.min(settled))) {
                continue;
            }
            if cell == goal && t > t0 && table.can_park(t, goal, me) {
                let mut steps = Vec::new();
                let mut at = (cell, t);
                while at != (start, t0) {
                    let (prev, entered) = parent.remove(&at).expect("parent chain");
                    steps.push(entered);
                    at = prev;
                }
                steps.reverse();
                return Some(Leg { steps });
            }
            if t >= limit {
                continue;
            }
            let nt = t + 1;
            'moves: for entered in self.moves(cell, v) {
                let end = *entered.last().unwrap();
                if dist[end as usize] == u32::MAX || closed.contains(&(end, nt.min(settled))) {
                    continue;
                }
                let mut from = cell;
                for &c in &entered {
                    if !table.is_free(nt, c, me) || (c != from && table.swaps(nt, from, c)) {
                        continue 'moves;
                    }
                    from = c;
                }
                let key = (end, nt);
                if parent.contains_key(&key) {
                    continue;
                }
                parent.insert(key, ((cell, t), entered));
                open.push(Reverse((nt + h(end, nt), Reverse(nt), end)));
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    /// Moving; arrives at the current target at this timestep.
    EnRoute(u64),
    /// At the current target, next leg not yet planned; retry at this
    /// timestep.
    Waiting { retry_at: u64, retries: u32 },
    Done,
}

/// State of a lifelong episode.
pub struct LifelongState<'a> {
    layout: &'a WarehouseLayout,
    agents: Vec<Agent>,
    queues: Vec<OrderedTargetQueue>,
    /// Agent indices in planning priority order.
    priority: Vec<usize>,
    rank: Vec<usize>,
    options: EpisodeOptions,
    horizon: u64,
    table: ReservationTable,
    searcher: Searcher<'a>,
    steps: Vec<Vec<TimedStep>>,
    /// Index of the target each agent is heading to or standing at.
    next: Vec<usize>,
    phase: Vec<Phase>,
    arrived: Vec<u64>,
    visits: Vec<Vec<Visit>>,
    lower: Vec<u64>,
    finished: Vec<Option<u64>>,
    failures: Vec<PlanFailure>,
    log: Vec<ReplanRecord>,
    replans: usize,
    deferrals: usize,
    initial_plans: usize,
}

impl<'a> LifelongState<'a> {
    /// Places every agent at its start. `queues[k]` belongs to `agents[k]`.
    pub fn new(agents: &[Agent], queues: &[OrderedTargetQueue], layout: &'a WarehouseLayout, options: EpisodeOptions) -> Result<Self, PlanError> {
        Self::on_raster(agents, queues, layout, layout.raster(), options)
    }

    /// As [`LifelongState::new`] with an explicit blocked-cell raster.
    pub(crate) fn on_raster(
        agents: &[Agent],
        queues: &[OrderedTargetQueue],
        layout: &'a WarehouseLayout,
        blocked: Vec<bool>,
        options: EpisodeOptions,
    ) -> Result<Self, PlanError> {
        let searcher = Searcher::new(layout, blocked);
        if agents.len() != queues.len() {
            return Err(PlanError::Shape(queues.len(), agents.len()));
        }
        let mut starts = HashMap::new();
        for a in agents {
            if !searcher.is_free_cell(a.position) {
                return Err(PlanError::BadStart(a.id));
            }
            if let Some(other) = starts.insert(a.position, a.id) {
                return Err(PlanError::SharedStart(other, a.id));
            }
        }
        for (a, q) in agents.iter().zip(queues) {
            if let Some(t) = q.targets.iter().find(|t| !searcher.is_free_cell(t.position)) {
                return Err(PlanError::BadTarget { agent: a.id, position: t.position });
            }
            if !q.precedence_violations().is_empty() {
                return Err(PlanError::Precedence(a.id));
            }
        }
        let mut priority: Vec<usize> = (0..agents.len()).collect();
        priority.sort_by(|&x, &y| {
            agents[y].cells_per_step().cmp(&agents[x].cells_per_step()).then(agents[x].id.cmp(&agents[y].id))
        });
        let mut rank = vec![0; agents.len()];
        for (r, &k) in priority.iter().enumerate() {
            rank[k] = r;
        }
        let mut table = ReservationTable::default();
        for (k, a) in agents.iter().enumerate() {
            let cell = layout.index(a.position) as u32;
            table.claim(0, cell, k as u32);
        }
        let n = agents.len();
        Ok(Self {
            layout,
            agents: agents.to_vec(),
            queues: queues.to_vec(),
            priority,
            rank,
            horizon: options.horizon.unwrap_or(4 * (layout.width + layout.height) as u64),
            options,
            table,
            searcher,
            steps: agents.iter().map(|a| vec![TimedStep { timestep: 0, position: a.position }]).collect(),
            next: vec![0; n],
            phase: vec![Phase::Waiting { retry_at: 0, retries: 0 }; n],
            arrived: vec![0; n],
            visits: vec![Vec::new(); n],
            lower: vec![0; n],
            finished: vec![None; n],
            failures: Vec::new(),
            log: Vec::new(),
            replans: 0,
            deferrals: 0,
            initial_plans: 0,
        })
    }

    fn cell(&self, p: GridPoint) -> u32 {
        self.layout.index(p) as u32
    }

    fn position(&self, k: usize) -> GridPoint {
        self.steps[k].last().unwrap().position
    }

    /// Plans every agent's first leg.
    ///
    /// Unplanned agents first hold their start cell only at timestep 0, and
    /// an agent whose leg cannot be found is moved to the front of the order
    /// before starting over. If no order works, every start cell is held
    /// until its agent departs and failed agents retry later.
    pub fn plan_all(&mut self) {
        let initial = (self.table.clone(), self.steps.clone());
        let mut order = self.priority.clone();
        for _ in 0..=order.len() {
            match self.attempt(&order) {
                Ok(()) => return,
                Err(k) => {
                    (self.table, self.steps) = initial.clone();
                    self.lower.iter_mut().for_each(|l| *l = 0);
                    let at = order.iter().position(|&j| j == k).unwrap();
                    if at == 0 {
                        break;
                    }
                    order.remove(at);
                    order.insert(0, k);
                }
            }
        }
        (self.table, self.steps) = initial;
        self.lower.iter_mut().for_each(|l| *l = 0);
        self.initial_plans = 0;
        for k in 0..self.agents.len() {
            let cell = self.cell(self.agents[k].position);
            self.table.park(cell, k as u32, 0);
        }
        for r in 0..self.priority.len() {
            let k = self.priority[r];
            if self.queues[k].targets.is_empty() {
                self.leave(k, 0);
            } else {
                self.initial_plans += 1;
                self.try_plan(k, 0, 0);
            }
        }
    }

    fn attempt(&mut self, order: &[usize]) -> Result<(), usize> {
        self.initial_plans = 0;
        for &k in order {
            if self.queues[k].targets.is_empty() {
                self.leave(k, 0);
            } else {
                self.initial_plans += 1;
                if !self.plan_leg(k, 0) {
                    return Err(k);
                }
            }
        }
        Ok(())
    }

    fn leave(&mut self, k: usize, now: u64) {
        let cell = self.cell(self.position(k));
        self.table.unpark(cell, k as u32, now);
        self.pad(k, now);
        self.phase[k] = Phase::Done;
    }

    /// Extends the agent's recorded path with waits through `t`.
    fn pad(&mut self, k: usize, t: u64) {
        let pos = self.position(k);
        let from = self.steps[k].last().unwrap().timestep;
        for s in from + 1..=t {
            self.steps[k].push(TimedStep { timestep: s, position: pos });
        }
    }

    /// Plans agent `k` towards `queues[k][next[k]]` departing at `depart`,
    /// scheduling a retry or recording a failure when no leg exists.
    fn try_plan(&mut self, k: usize, depart: u64, retries: u32) -> bool {
        if self.plan_leg(k, depart) {
            return true;
        }
        let retry_at = self.next_event_after(k, depart).max(depart + 1);
        self.wait_or_fail(k, depart, retries, retry_at);
        false
    }

    fn wait_or_fail(&mut self, k: usize, depart: u64, retries: u32, retry_at: u64) {
        if retries >= self.options.retry_cap {
            self.failures.push(PlanFailure { agent_id: self.agents[k].id, target_index: self.next[k], timestep: depart });
            self.leave(k, depart);
        } else {
            self.phase[k] = Phase::Waiting { retry_at, retries: retries + 1 };
        }
    }

    /// Another agent parked on `k`'s next target, if any.
    fn goal_holder(&self, k: usize) -> Option<usize> {
        let goal = self.cell(self.queues[k].targets[self.next[k]].position);
        self.table.tail.get(&goal).map(|&(o, _)| o as usize).filter(|&o| o != k)
    }

    /// Searches and, on success, commits one leg.
    fn plan_leg(&mut self, k: usize, depart: u64) -> bool {
        let target = self.queues[k].targets[self.next[k]].clone();
        let here = self.position(k);
        let (start, goal) = (self.cell(here), self.cell(target.position));
        let v = self.agents[k].cells_per_step();
        let Some(leg) = self.searcher.search(start, depart, goal, v, k as u32, &self.table, self.horizon) else {
            return false;
        };
        let lb = self.searcher.distances(goal)[start as usize];
        self.lower[k] += u64::from(lb);
        self.table.unpark(start, k as u32, depart);
        self.pad(k, depart);
        if let Some(visit) = self.visits[k].last_mut() {
            visit.departed = depart;
        }
        let mut from = start;
        for (i, entered) in leg.steps.iter().enumerate() {
            let t = depart + 1 + i as u64;
            for &c in entered {
                self.table.claim(t, c, k as u32);
                if c != from {
                    self.table.claim_edge(t, from, c);
                }
                from = c;
                self.steps[k].push(TimedStep { timestep: t, position: self.layout.point(c as usize) });
            }
        }
        let arrival = depart + leg.steps.len() as u64;
        self.table.park(goal, k as u32, arrival);
        self.phase[k] = Phase::EnRoute(arrival);
        true
    }

    fn event_time(&self, k: usize) -> Option<u64> {
        match self.phase[k] {
            Phase::EnRoute(t) => Some(t),
            Phase::Waiting { retry_at, .. } => Some(retry_at),
            Phase::Done => None,
        }
    }

    fn next_event_after(&self, me: usize, now: u64) -> u64 {
        (0..self.agents.len())
            .filter(|&k| k != me)
            .filter_map(|k| self.event_time(k))
            .filter(|&t| t > now)
            .min()
            .unwrap_or(now + 1)
    }

    /// Earliest pending event as (timestep, agent index); ties go to the
    /// higher-priority agent.
    pub fn next_event(&self) -> Option<(u64, usize)> {
        (0..self.agents.len()).filter_map(|k| self.event_time(k).map(|t| (t, k))).min_by_key(|&(t, k)| (t, self.rank[k]))
    }

    /// Remaining timesteps of agent `k` to its current target at `now`.
    pub fn tau(&self, k: usize, now: u64) -> Option<u64> {
        match self.phase[k] {
            Phase::EnRoute(t) => Some(t.saturating_sub(now)),
            _ => None,
        }
    }

    /// Handles the pending event of agent `k`: on arrival, records the visit
    /// and replans only this agent to its next target; every other agent's
    /// committed claims stand.
    pub fn lifelong_step(&mut self, k: usize) -> Option<ReplanRecord> {
        let now = self.event_time(k)?;
        let (depart, retries) = match self.phase[k] {
            Phase::EnRoute(arrival) => {
                let target = self.queues[k].targets[self.next[k]].clone();
                self.arrived[k] = arrival;
                let mut depart = arrival;
                if self.options.enforce_windows && target.kind == TargetKind::Pickup {
                    depart = depart.max(target.time_start.max(0.0).ceil() as u64);
                }
                self.visits[k].push(Visit { task_id: target.task_id, kind: target.kind, arrived: arrival, departed: depart });
                self.next[k] += 1;
                if self.next[k] == self.queues[k].targets.len() {
                    self.finished[k] = Some(arrival);
                    self.leave(k, arrival);
                    return None;
                }
                (depart, 0)
            }
            Phase::Waiting { retry_at, retries } => (retry_at, retries),
            Phase::Done => return None,
        };
        // a held goal frees up no earlier than its holder's next event, and
        // searching before then cannot succeed
        if let Some(holder) = self.goal_holder(k) {
            self.pad(k, depart);
            let retry_at = self.event_time(holder).unwrap_or(depart + 1).max(depart + 1);
            self.deferrals += 1;
            self.wait_or_fail(k, depart, retries, retry_at);
            return None;
        }
        let offsets = (0..self.agents.len())
            .filter(|&j| j != k)
            .filter_map(|j| self.tau(j, now).map(|tau| (self.agents[j].id, tau)))
            .collect();
        self.replans += 1;
        let ok = self.try_plan(k, depart, retries);
        let record = ReplanRecord { timestep: depart, agent_id: self.agents[k].id, succeeded: ok, offsets };
        self.log.push(record.clone());
        Some(record)
    }

    /// Agents whose last recorded claim is not yet committed by a departure.
    pub fn is_done(&self) -> bool {
        self.phase.iter().all(|p| *p == Phase::Done)
    }

    pub fn finish(mut self) -> Episode {
        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        order.sort_by_key(|&k| self.agents[k].id);
        let mut runs = Vec::with_capacity(order.len());
        for k in order {
            let path = TimedPath { agent_id: self.agents[k].id, steps: std::mem::take(&mut self.steps[k]) };
            runs.push(AgentRun {
                agent_id: self.agents[k].id,
                length: path.length(),
                path,
                visits: std::mem::take(&mut self.visits[k]),
                lower_bound: self.lower[k],
                finished: self.finished[k],
            });
        }
        Episode {
            kind: Episode::KIND.to_string(),
            total_length: runs.iter().map(|r| r.length).sum(),
            makespan: runs.iter().filter_map(|r| r.finished).max().unwrap_or(0),
            agents: runs,
            replans: self.replans,
            deferrals: self.deferrals,
            initial_plans: self.initial_plans,
            targets: self.queues.iter().map(|q| q.targets.len()).sum(),
            failures: self.failures,
            log: self.log,
        }
    }
}

/// Plans and executes all queues to completion. `queues[k]` belongs to
/// `agents[k]`.
pub fn plan_all(agents: &[Agent], queues: &[OrderedTargetQueue], layout: &WarehouseLayout, options: &EpisodeOptions) -> Result<Episode, PlanError> {
    let mut state = LifelongState::new(agents, queues, layout, options.clone())?;
    state.plan_all();
    while let Some((_, k)) = state.next_event() {
        state.lifelong_step(k);
    }
    Ok(state.finish())
}

/// Executes an allocation's queues on its scenario layout.
pub fn run_episode(alloc: &Allocation, options: &EpisodeOptions) -> Result<Episode, PlanError> {
    plan_all(&alloc.agents_by_id(), &alloc.queues, &alloc.scenario.layout, options)
}

fn cells_entered(path: &TimedPath) -> Vec<(u64, Vec<GridPoint>)> {
    let mut out: Vec<(u64, Vec<GridPoint>)> = Vec::new();
    for s in &path.steps {
        match out.last_mut() {
            Some((t, cells)) if *t == s.timestep => cells.push(s.position),
            _ => out.push((s.timestep, vec![s.position])),
        }
    }
    out
}

/// Post-hoc check of an episode: motion limits, shelf cells, vertex and
/// swap conflicts, target order and pickup windows.
pub fn validate_episode(episode: &Episode, agents: &[Agent], queues: &[OrderedTargetQueue], layout: &WarehouseLayout, enforce_windows: bool) -> Vec<Violation> {
    validate_on_raster(episode, agents, queues, layout, &layout.raster(), enforce_windows)
}

fn validate_on_raster(
    episode: &Episode,
    agents: &[Agent],
    queues: &[OrderedTargetQueue],
    layout: &WarehouseLayout,
    blocked: &[bool],
    enforce_windows: bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let by_id: HashMap<AgentId, (&Agent, &OrderedTargetQueue)> = agents.iter().zip(queues).map(|(a, q)| (a.id, (a, q))).collect();
    let mut occupancy: HashMap<(u64, GridPoint), AgentId> = HashMap::new();
    let mut crossings: HashMap<(u64, GridPoint, GridPoint), AgentId> = HashMap::new();
    for run in &episode.agents {
        let id = run.agent_id;
        let Some(&(agent, queue)) = by_id.get(&id) else {
            out.push(Violation::agent(id, "unknown agent"));
            continue;
        };
        let path = &run.path;
        if path.steps.first().map(|s| (s.timestep, s.position)) != Some((0, agent.position)) {
            out.push(Violation::agent(id, "path does not start at the agent position at timestep 0"));
        }
        let mut prev: Option<(u64, GridPoint)> = None;
        for (t, cells) in cells_entered(path) {
            if let Some((pt, _)) = prev {
                if t != pt + 1 {
                    out.push(Violation::agent(id, format!("path skips from timestep {pt} to {t}")));
                }
            }
            let moves = cells.len() as u32;
            if prev.is_some() && moves > agent.cells_per_step() {
                out.push(Violation::agent(id, format!("{moves} cells entered at timestep {t}")));
            }
            let mut from = prev.map(|(_, p)| p);
            for &c in &cells {
                if !layout.in_bounds(c) || blocked[layout.index(c)] {
                    out.push(Violation::agent(id, format!("occupies non-aisle cell {c} at timestep {t}")));
                }
                if let Some(f) = from {
                    if f.manhattan(c) > 1 {
                        out.push(Violation::agent(id, format!("jumps from {f} to {c} at timestep {t}")));
                    }
                    if f != c {
                        if let Some(other) = crossings.get(&(t, c, f)) {
                            out.push(Violation::agent(id, format!("swaps with {other} between {f} and {c} at timestep {t}")));
                        }
                        crossings.insert((t, f, c), id);
                    }
                }
                if let Some(&other) = occupancy.get(&(t, c)) {
                    if other != id {
                        out.push(Violation::agent(id, format!("collides with {other} at {c} at timestep {t}")));
                    }
                }
                occupancy.insert((t, c), id);
                from = Some(c);
            }
            prev = Some((t, *cells.last().unwrap()));
        }
        let expected: Vec<&Target> = queue.targets.iter().take(run.visits.len()).collect();
        for (v, target) in run.visits.iter().zip(&expected) {
            if v.task_id != target.task_id || v.kind != target.kind {
                out.push(Violation::agent(id, format!("visits task {} out of queue order", v.task_id)));
            } else if path.position_at(v.arrived) != Some(target.position) {
                out.push(Violation::task(v.task_id, format!("{id} is not at the target at timestep {}", v.arrived)));
            }
            if enforce_windows && v.kind == TargetKind::Pickup && (v.departed as f64) < target.time_start {
                out.push(Violation::task(v.task_id, format!("picked up at {} before window opens at {}", v.departed, target.time_start)));
            }
        }
        if run.finished.is_some() && run.visits.len() != queue.targets.len() {
            out.push(Violation::agent(id, "marked finished with unvisited targets"));
        }
    }
    out
}

/// Per-agent path CSV with header `timestep,x,y`.
pub fn path_csv(path: &TimedPath) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestep", "x", "y"])?;
    for s in &path.steps {
        w.write_record([s.timestep.to_string(), s.position.x.to_string(), s.position.y.to_string()])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}
