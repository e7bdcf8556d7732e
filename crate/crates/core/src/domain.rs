//! Core value types shared by every stage of the pipeline.
//!
//! Tasks and agents follow the warehouse pickup-and-delivery model: a task
//! moves `request` units of one cargo type from a pickup cell to a delivery
//! cell inside a time window, and an agent carries up to `capacity` units of
//! a single cargo type at an integer-ish `velocity` in cells per time unit.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::WarehouseLayout;

/// A cell on the warehouse grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: i32,
    pub y: i32,
}

impl GridPoint {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: GridPoint) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// The four rectilinear neighbours, in a fixed order (E, W, S, N).
    pub fn neighbours(self) -> [GridPoint; 4] {
        let GridPoint { x, y } = self;
        [
            GridPoint::new(x + 1, y),
            GridPoint::new(x - 1, y),
            GridPoint::new(x, y + 1),
            GridPoint::new(x, y - 1),
        ]
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task {}", self.0)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}", self.0)
    }
}

/// Cargo type tag. An agent may only carry tasks of its own type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CargoType(pub u8);

impl CargoType {
    pub const GENERAL: CargoType = CargoType(0);
    pub const SPECIAL: CargoType = CargoType(1);
}

impl Default for CargoType {
    fn default() -> Self {
        Self::GENERAL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub position_start: GridPoint,
    pub position_end: GridPoint,
    pub time_start: f64,
    pub time_end: f64,
    pub request: u32,
    #[serde(default)]
    pub cargo_type: CargoType,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub position: GridPoint,
    pub capacity: u32,
    #[serde(default)]
    pub cargo_type: CargoType,
    pub velocity: f64,
}

impl Agent {
    /// Whole cells the agent may cross in one planner timestep.
    pub fn cells_per_step(&self) -> u32 {
        (self.velocity.floor() as u32).max(1)
    }

    pub fn can_carry(&self, task: &Task) -> bool {
        self.cargo_type == task.cargo_type && task.request <= self.capacity
    }
}

/// Tasks keyed by id.
pub type TaskLookup<'a> = std::collections::BTreeMap<TaskId, &'a Task>;

pub fn index_tasks(tasks: &[Task]) -> TaskLookup<'_> {
    tasks.iter().map(|t| (t.id, t)).collect()
}

/// A complete problem instance: the layout plus the agents and tasks on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub layout: WarehouseLayout,
    pub agents: Vec<Agent>,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Vec<Violation> {
        validate_scenario(&self.agents, &self.tasks, &self.layout)
    }
}

/// The thing a [`Violation`] is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum Subject {
    Layout,
    Task(TaskId),
    Agent(AgentId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: Subject,
    pub message: String,
}

impl Violation {
    pub fn task(id: TaskId, message: impl Into<String>) -> Self {
        Self { subject: Subject::Task(id), message: message.into() }
    }

    pub fn agent(id: AgentId, message: impl Into<String>) -> Self {
        Self { subject: Subject::Agent(id), message: message.into() }
    }

    pub fn layout(message: impl Into<String>) -> Self {
        Self { subject: Subject::Layout, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subject {
            Subject::Layout => write!(f, "layout: {}", self.message),
            Subject::Task(id) => write!(f, "{id}: {}", self.message),
            Subject::Agent(id) => write!(f, "{id}: {}", self.message),
        }
    }
}

/// Checks every task and agent invariant against `layout`.
///
/// Violations are returned as data; an empty list means the scenario is
/// well formed.
pub fn validate_scenario(agents: &[Agent], tasks: &[Task], layout: &WarehouseLayout) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Err(e) = layout.validate() {
        out.push(Violation::layout(e.to_string()));
        return out;
    }

    let mut seen_tasks = BTreeSet::new();
    for task in tasks {
        let id = task.id;
        if !seen_tasks.insert(id) {
            out.push(Violation::task(id, "duplicate task id"));
        }
        if !(task.time_start.is_finite() && task.time_end.is_finite()) {
            out.push(Violation::task(id, "time window is not finite"));
        } else if task.time_start < 0.0 {
            out.push(Violation::task(id, format!("negative time_start {}", task.time_start)));
        }
        if !(task.time_start < task.time_end) {
            out.push(Violation::task(
                id,
                format!("time_end {} does not exceed time_start {}", task.time_end, task.time_start),
            ));
        }
        if task.position_start == task.position_end {
            out.push(Violation::task(id, "pickup and delivery coincide"));
        }
        if task.request == 0 {
            out.push(Violation::task(id, "request must be positive"));
        }
        if !(task.value >= 0.0) || !task.value.is_finite() {
            out.push(Violation::task(id, format!("value {} must be finite and non-negative", task.value)));
        }
        for (label, p) in [("pickup", task.position_start), ("delivery", task.position_end)] {
            if !layout.in_bounds(p) {
                out.push(Violation::task(id, format!("{label} {p} outside the grid")));
            } else if layout.is_shelf(p) {
                out.push(Violation::task(id, format!("{label} {p} lies inside a shelf")));
            }
        }
    }

    let mut seen_agents = BTreeSet::new();
    for agent in agents {
        let id = agent.id;
        if !seen_agents.insert(id) {
            out.push(Violation::agent(id, "duplicate agent id"));
        }
        if agent.capacity == 0 {
            out.push(Violation::agent(id, "capacity must be positive"));
        }
        if !(agent.velocity > 0.0) || !agent.velocity.is_finite() {
            out.push(Violation::agent(id, format!("velocity {} must be positive", agent.velocity)));
        }
        if !layout.in_bounds(agent.position) {
            out.push(Violation::agent(id, format!("position {} outside the grid", agent.position)));
        } else if layout.is_shelf(agent.position) {
            out.push(Violation::agent(id, format!("position {} lies inside a shelf", agent.position)));
        }
    }
    out
}

/// Which end of a task a queue entry visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Pickup,
    Delivery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub position: GridPoint,
    pub kind: TargetKind,
    pub task_id: TaskId,
    pub time_start: f64,
    pub time_end: f64,
}

impl Target {
    pub fn pickup(task: &Task) -> Self {
        Self {
            position: task.position_start,
            kind: TargetKind::Pickup,
            task_id: task.id,
            time_start: task.time_start,
            time_end: task.time_end,
        }
    }

    pub fn delivery(task: &Task) -> Self {
        Self {
            position: task.position_end,
            kind: TargetKind::Delivery,
            task_id: task.id,
            time_start: task.time_start,
            time_end: task.time_end,
        }
    }
}

/// The ordered list of cells an agent visits once allocation is final.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedTargetQueue {
    pub agent_id: AgentId,
    pub targets: Vec<Target>,
}

impl OrderedTargetQueue {
    pub fn empty(agent_id: AgentId) -> Self {
        Self { agent_id, targets: Vec::new() }
    }

    /// Task ids in order of first appearance.
    pub fn task_ids(&self) -> Vec<TaskId> {
        let mut seen = BTreeSet::new();
        self.targets
            .iter()
            .filter(|t| seen.insert(t.task_id))
            .map(|t| t.task_id)
            .collect()
    }

    /// Tasks whose entries are not exactly one pickup followed later by one
    /// delivery.
    pub fn precedence_violations(&self) -> Vec<TaskId> {
        let mut picked = BTreeSet::new();
        let mut delivered = BTreeSet::new();
        let mut bad = BTreeSet::new();
        for t in &self.targets {
            match t.kind {
                TargetKind::Pickup => {
                    if !picked.insert(t.task_id) || delivered.contains(&t.task_id) {
                        bad.insert(t.task_id);
                    }
                }
                TargetKind::Delivery => {
                    if !picked.contains(&t.task_id) || !delivered.insert(t.task_id) {
                        bad.insert(t.task_id);
                    }
                }
            }
        }
        for id in &picked {
            if !delivered.contains(id) {
                bad.insert(*id);
            }
        }
        bad.into_iter().collect()
    }
}

/// A group of tasks auctioned as one surrogate task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGroup {
    pub group_id: u32,
    pub member_ids: Vec<TaskId>,
    pub meta_task: Task,
}

/// Per-agent auction state.
///
/// `x`, `y` and `z` are indexed by auction item (meta-task index), `t` by
/// agent index. `bundle` lists won items in the order they were added;
/// `path` lists the same items in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidState {
    pub agent: usize,
    pub x: Vec<bool>,
    pub y: Vec<f64>,
    pub z: Vec<Option<usize>>,
    pub t: Vec<u64>,
    pub bundle: Vec<usize>,
    pub path: Vec<usize>,
    pub bundle_request: u32,
}

impl BidState {
    pub fn new(agent: usize, n_agents: usize, n_tasks: usize) -> Self {
        Self {
            agent,
            x: vec![false; n_tasks],
            y: vec![0.0; n_tasks],
            z: vec![None; n_tasks],
            t: vec![0; n_agents],
            bundle: Vec::new(),
            path: Vec::new(),
            bundle_request: 0,
        }
    }

    pub fn holds(&self, task: usize) -> bool {
        self.x[task]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Orientation, WarehouseLayout};

    fn layout() -> WarehouseLayout {
        WarehouseLayout::new(20, 20, 5, 1, 3, 3, GridPoint::new(2, 2), Orientation::XAxis)
    }

    fn task(id: u32) -> Task {
        Task {
            id: TaskId(id),
            position_start: GridPoint::new(1, 1),
            position_end: GridPoint::new(0, 10),
            time_start: 0.0,
            time_end: 100.0,
            request: 10,
            cargo_type: CargoType::GENERAL,
            value: 1.0,
        }
    }

    fn agent(id: u32) -> Agent {
        Agent {
            id: AgentId(id),
            position: GridPoint::new(0, 0),
            capacity: 100,
            cargo_type: CargoType::GENERAL,
            velocity: 1.0,
        }
    }

    #[test]
    fn well_formed_scenario_has_no_violations() {
        assert!(validate_scenario(&[agent(0)], &[task(0)], &layout()).is_empty());
    }

    #[test]
    fn inverted_window_is_reported_once() {
        let mut t = task(4);
        t.time_start = 50.0;
        t.time_end = 10.0;
        let v = validate_scenario(&[agent(0)], &[t], &layout());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, Subject::Task(TaskId(4)));
    }

    #[test]
    fn pickup_inside_shelf_is_reported() {
        let l = layout();
        let shelf = (0..20)
            .flat_map(|x| (0..20).map(move |y| GridPoint::new(x, y)))
            .find(|p| l.is_shelf(*p))
            .unwrap();
        let mut t = task(2);
        t.position_start = shelf;
        let v = validate_scenario(&[agent(0)], &[t], &l);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("shelf"));
    }

    #[test]
    fn zero_capacity_and_velocity_are_reported() {
        let mut a = agent(1);
        a.capacity = 0;
        a.velocity = 0.0;
        assert_eq!(validate_scenario(&[a], &[], &layout()).len(), 2);
    }

    #[test]
    fn precedence_checker_flags_delivery_first() {
        let t = task(7);
        let q = OrderedTargetQueue {
            agent_id: AgentId(0),
            targets: vec![Target::delivery(&t), Target::pickup(&t)],
        };
        assert_eq!(q.precedence_violations(), vec![TaskId(7)]);
        let ok = OrderedTargetQueue {
            agent_id: AgentId(0),
            targets: vec![Target::pickup(&t), Target::delivery(&t)],
        };
        assert!(ok.precedence_violations().is_empty());
    }

    #[test]
    fn bid_state_starts_empty() {
        let s = BidState::new(1, 3, 4);
        assert!(s.y.iter().all(|&y| y == 0.0));
        assert!(s.z.iter().all(Option::is_none));
        assert_eq!(s.t.len(), 3);
    }
}
