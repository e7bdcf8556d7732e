//! End-to-end allocation: decomposition, grouping, auction and ordering,
//! plus the shared allocation validator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{unpack_and_sort, AuctionError};
use crate::baselines;
use crate::domain::{index_tasks, Agent, OrderedTargetQueue, Scenario, Task, TaskGroup, TaskId, Violation};
use crate::netsim::{make_graph, run_consensus, ConsensusError, ConsensusReport, GraphKind};
use crate::scoring::{ScoreError, ScoreParams, Scorer};
use crate::taskprep::{decompose, group, GroupingConfig, Grouping, PrepError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocatorKind {
    Gcbha,
    Cbga,
    Central,
    TaPriority,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 4] = [Self::Gcbha, Self::Cbga, Self::Central, Self::TaPriority];

    /// Whether the allocator runs the auction and consensus machinery.
    pub fn is_consensus(self) -> bool {
        matches!(self, Self::Gcbha | Self::Cbga)
    }

    /// Human-facing name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::Gcbha => "GCBHA",
            Self::Cbga => "CBGA",
            Self::Central => "CENTRAL",
            Self::TaPriority => "TA-priority (reconstructed)",
        }
    }
}

impl FromStr for AllocatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcbha" => Ok(Self::Gcbha),
            "cbga" => Ok(Self::Cbga),
            "central" => Ok(Self::Central),
            "ta-priority" | "ta_priority" | "tapriority" => Ok(Self::TaPriority),
            other => Err(format!("unknown allocator `{other}`")),
        }
    }
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gcbha => "gcbha",
            Self::Cbga => "cbga",
            Self::Central => "central",
            Self::TaPriority => "ta-priority",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocParams {
    pub allocator: AllocatorKind,
    pub request_group: u32,
    pub score: ScoreParams,
    pub graph: GraphKind,
    /// Seed for random communication graphs.
    pub graph_seed: u64,
    #[serde(default)]
    pub round_cap: Option<u64>,
}

impl Default for AllocParams {
    fn default() -> Self {
        Self {
            allocator: AllocatorKind::Gcbha,
            request_group: 50,
            score: ScoreParams::default(),
            graph: GraphKind::Full,
            graph_seed: 0,
            round_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocError {
    #[error("scenario is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
}

/// Allocation output: queues plus everything needed to plan and audit them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub kind: String,
    pub allocator: AllocatorKind,
    pub params: AllocParams,
    pub scenario: Scenario,
    /// Tasks after decomposition; queues refer to these ids.
    pub tasks: Vec<Task>,
    /// Auction items of consensus allocators.
    #[serde(default)]
    pub groups: Vec<TaskGroup>,
    /// One queue per agent, in ascending agent id order.
    pub queues: Vec<OrderedTargetQueue>,
    /// Estimator length of each queue, starting at its agent.
    pub predicted_lengths: Vec<f64>,
    pub predicted_total: f64,
    /// Total time-discounted score of executing the queues.
    pub score: f64,
    pub late_tasks: usize,
    pub unassigned: Vec<TaskId>,
    #[serde(default)]
    pub consensus: Option<ConsensusReport>,
    pub estimator_fallback: bool,
}

impl Allocation {
    pub const KIND: &'static str = "allocation";

    pub fn agents_by_id(&self) -> Vec<Agent> {
        sorted_agents(&self.scenario.agents)
    }
}

pub(crate) fn sorted_agents(agents: &[Agent]) -> Vec<Agent> {
    let mut a = agents.to_vec();
    a.sort_by_key(|a| a.id);
    a
}

/// Auction `grouping`'s meta-tasks among `agents` (sorted by id) and unpack
/// each agent's winnings into an ordered target queue.
pub fn consensus_queues(
    agents: &[Agent],
    tasks: &[Task],
    grouping: &Grouping,
    graph: GraphKind,
    graph_seed: u64,
    scorer: &Scorer,
    round_cap: Option<u64>,
) -> Result<(Vec<OrderedTargetQueue>, ConsensusReport), AllocError> {
    let items = grouping.meta_tasks();
    let g = make_graph(graph, agents.len(), graph_seed);
    let outcome = run_consensus(agents, &items, &g, scorer, round_cap)?;
    let lookup = index_tasks(tasks);
    let queues = agents
        .iter()
        .zip(&outcome.states)
        .map(|(a, s)| unpack_and_sort(&s.path, grouping, &lookup, a, scorer))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((queues, outcome.report))
}

/// Runs the selected allocator on `scenario`.
pub fn allocate(scenario: &Scenario, params: &AllocParams) -> Result<Allocation, AllocError> {
    let violations = scenario.validate();
    if !violations.is_empty() {
        return Err(AllocError::Invalid(violations));
    }
    params.score.validate()?;
    let agents = sorted_agents(&scenario.agents);
    let tasks = decompose(&scenario.tasks, &agents)?;
    let scorer = Scorer::new(params.score, scenario.layout.clone());
    let (queues, groups, consensus) = match params.allocator {
        AllocatorKind::Gcbha => {
            let grouping = group(&tasks, GroupingConfig { request_group: params.request_group }, scorer.cost_model());
            let (q, r) = consensus_queues(&agents, &tasks, &grouping, params.graph, params.graph_seed, &scorer, params.round_cap)?;
            (q, grouping.groups, Some(r))
        }
        AllocatorKind::Cbga => {
            let (q, grouping, r) = baselines::cbga_allocate(&agents, &tasks, params.graph, params.graph_seed, &scorer, params.round_cap)?;
            (q, grouping.groups, Some(r))
        }
        AllocatorKind::Central => (baselines::central_allocate(&agents, &tasks, &scorer), Vec::new(), None),
        AllocatorKind::TaPriority => (baselines::ta_priority_allocate(&agents, &tasks, &scorer), Vec::new(), None),
    };
    Ok(finish(scenario, params, &agents, tasks, groups, queues, consensus, &scorer))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    scenario: &Scenario,
    params: &AllocParams,
    agents: &[Agent],
    tasks: Vec<Task>,
    groups: Vec<TaskGroup>,
    queues: Vec<OrderedTargetQueue>,
    consensus: Option<ConsensusReport>,
    scorer: &Scorer,
) -> Allocation {
    let lookup = index_tasks(&tasks);
    let mut score = 0.0;
    let mut late = 0;
    let mut predicted = Vec::with_capacity(queues.len());
    for (a, q) in agents.iter().zip(&queues) {
        let e = scorer.queue_score(a, q, &lookup);
        score += e.score;
        late += e.late_tasks;
        predicted.push(scorer.queue_length(a, q));
    }
    let assigned: BTreeSet<TaskId> = queues.iter().flat_map(|q| q.targets.iter().map(|t| t.task_id)).collect();
    let unassigned = tasks.iter().map(|t| t.id).filter(|id| !assigned.contains(id)).collect();
    Allocation {
        kind: Allocation::KIND.to_string(),
        allocator: params.allocator,
        params: *params,
        scenario: scenario.clone(),
        predicted_total: predicted.iter().sum(),
        predicted_lengths: predicted,
        tasks,
        groups,
        queues,
        score,
        late_tasks: late,
        unassigned,
        consensus,
        estimator_fallback: scorer.cost_model().is_fallback(),
    }
}

/// Structural problems in an allocation: precedence, capacity, cargo type,
/// unknown or repeated tasks, and queues for unknown agents.
pub fn validate_allocation(alloc: &Allocation) -> Vec<Violation> {
    let mut out = Vec::new();
    let tasks: BTreeMap<TaskId, &Task> = index_tasks(&alloc.tasks);
    let agents: BTreeMap<_, &Agent> = alloc.scenario.agents.iter().map(|a| (a.id, a)).collect();
    let mut owner: BTreeMap<TaskId, crate::domain::AgentId> = BTreeMap::new();
    for q in &alloc.queues {
        let Some(agent) = agents.get(&q.agent_id) else {
            out.push(Violation::agent(q.agent_id, "queue for an agent not in the scenario"));
            continue;
        };
        for id in q.precedence_violations() {
            out.push(Violation::task(id, format!("pickup does not precede delivery in the queue of {}", q.agent_id)));
        }
        let mut load = 0u32;
        for id in q.task_ids() {
            let Some(task) = tasks.get(&id) else {
                out.push(Violation::task(id, "queue references an unknown task"));
                continue;
            };
            if let Some(prev) = owner.insert(id, q.agent_id) {
                out.push(Violation::task(id, format!("assigned to both {prev} and {}", q.agent_id)));
            }
            if task.cargo_type != agent.cargo_type {
                out.push(Violation::task(id, format!("cargo type does not match {}", q.agent_id)));
            }
            load += task.request;
        }
        if load > agent.capacity {
            out.push(Violation::agent(q.agent_id, format!("queue demand {load} exceeds capacity {}", agent.capacity)));
        }
    }
    out
}
