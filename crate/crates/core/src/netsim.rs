//! Simulated communication network and the round-based consensus driver.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{apply_message, build_bundle, AuctionError};
use crate::domain::{Agent, BidState, Task};
use crate::scoring::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "p")]
#[derive(Default)]
pub enum GraphKind {
    #[default]
    Full,
    Line,
    Ring,
    Random(f64),
}


impl FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "full" => Ok(GraphKind::Full),
            "line" => Ok(GraphKind::Line),
            "ring" => Ok(GraphKind::Ring),
            other => {
                let p = other
                    .strip_prefix("random:")
                    .ok_or_else(|| format!("unknown graph `{s}`; expected full, line, ring or random:p"))?;
                let p: f64 = p.parse().map_err(|_| format!("bad edge probability in `{s}`"))?;
                if p > 0.0 && p <= 1.0 {
                    Ok(GraphKind::Random(p))
                } else {
                    Err(format!("edge probability must lie in (0, 1], got {p}"))
                }
            }
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Full => f.write_str("full"),
            GraphKind::Line => f.write_str("line"),
            GraphKind::Ring => f.write_str("ring"),
            GraphKind::Random(p) => write!(f, "random:{p}"),
        }
    }
}

/// Undirected communication graph with self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommGraph {
    adjacency: Vec<Vec<bool>>,
}

impl CommGraph {
    /// Builds a graph from an edge list; self-loops are implied.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![vec![false; n]; n];
        for (i, row) in adjacency.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in edges {
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        Self { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn linked(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    /// Neighbours of `i` in ascending order, excluding `i`.
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().enumerate().filter(move |&(k, &e)| e && k != i).map(|(k, _)| k)
    }

    /// Number of directed (sender, receiver) pairs per round.
    pub fn directed_links(&self) -> u64 {
        (0..self.len()).map(|i| self.neighbours(i).count() as u64).sum()
    }

    fn hops_from(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for v in self.neighbours(u) {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Component label per node, labels in order of first node.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        for s in 0..self.len() {
            if label[s] != usize::MAX {
                continue;
            }
            for (v, d) in self.hops_from(s).into_iter().enumerate() {
                if d.is_some() {
                    label[v] = next;
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Largest hop distance between two nodes of the same component.
    pub fn diameter(&self) -> usize {
        (0..self.len()).map(|s| self.hops_from(s).into_iter().flatten().max().unwrap_or(0)).max().unwrap_or(0)
    }
}

/// Deterministic graph of the given family. Random graphs are resampled
/// until connected; after many failed draws a line is overlaid.
pub fn make_graph(kind: GraphKind, n: usize, seed: u64) -> CommGraph {
    match kind {
        GraphKind::Full => CommGraph::from_edges(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)))),
        GraphKind::Line => CommGraph::from_edges(n, (1..n).map(|b| (b - 1, b))),
        GraphKind::Ring => {
            let mut edges: Vec<(usize, usize)> = (1..n).map(|b| (b - 1, b)).collect();
            if n > 2 {
                edges.push((n - 1, 0));
            }
            CommGraph::from_edges(n, edges)
        }
        GraphKind::Random(p) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10_000 {
                let mut edges = Vec::new();
                for a in 0..n {
                    for b in a + 1..n {
                        if rng.gen_bool(p.clamp(0.0, 1.0)) {
                            edges.push((a, b));
                        }
                    }
                }
                let g = CommGraph::from_edges(n, edges);
                if g.is_connected() {
                    return g;
                }
            }
            let mut edges: Vec<(usize, usize)> = (1..n).map(|b| (b - 1, b)).collect();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(p.clamp(0.0, 1.0)) {
                        edges.push((a, b));
                    }
                }
            }
            CommGraph::from_edges(n, edges)
        }
    }
}

/// Per-item beliefs when agents of one component disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub item: usize,
    /// `(agent, believed winner, believed bid)` for every agent.
    pub beliefs: Vec<(usize, Option<usize>, f64)>,
}

impl fmt::Display for Disagreement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "item {}:", self.item)?;
        for (a, z, y) in &self.beliefs {
            match z {
                Some(w) => write!(f, " [{a}: {w} @ {y:.4}]")?,
                None => write!(f, " [{a}: none]")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("no consensus after {rounds} rounds; {} items disputed", disagreements.len())]
    NonConvergence { rounds: u64, disagreements: Vec<Disagreement> },
    #[error("graph has {graph} nodes but there are {agents} agents")]
    GraphSize { graph: usize, agents: usize },
    #[error(transparent)]
    Auction(#[from] AuctionError),
}

/// Telemetry of one consensus run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConsensusReport {
    /// Last round in which any agent's state changed.
    pub rounds: u64,
    /// Rounds simulated, including the trailing quiet ones.
    pub rounds_executed: u64,
    /// Messages sent up to and including round `rounds`.
    pub messages: u64,
    pub components: usize,
    /// Items claimed by more than one agent (only possible across components).
    pub double_assignments: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusOutcome {
    pub states: Vec<BidState>,
    pub report: ConsensusReport,
}

/// Default round cap for `n` agents and `m` items.
pub fn default_round_cap(n: usize, m: usize) -> u64 {
    (4 * n as u64 * m as u64).max(16)
}

/// Runs synchronous bid/exchange rounds until no state changes for as many
/// consecutive rounds as the graph diameter (at least one).
///
/// Every round each agent first extends its bundle, then every agent merges
/// the snapshots of its neighbours in ascending order. Agents are indexed by
/// position in `agents`.
pub fn run_consensus(
    agents: &[Agent],
    items: &[Task],
    graph: &CommGraph,
    scorer: &Scorer,
    round_cap: Option<u64>,
) -> Result<ConsensusOutcome, ConsensusError> {
    let n = agents.len();
    if graph.len() != n {
        return Err(ConsensusError::GraphSize { graph: graph.len(), agents: n });
    }
    let cap = round_cap.unwrap_or_else(|| default_round_cap(n, items.len()));
    let quiet_needed = graph.diameter().max(1) as u64;
    let links = graph.directed_links();
    let neighbours: Vec<Vec<usize>> = (0..n).map(|i| graph.neighbours(i).collect()).collect();

    let mut states: Vec<BidState> = (0..n).map(|i| BidState::new(i, n, items.len())).collect();
    let mut dirty = vec![true; n];
    let mut report = ConsensusReport::default();
    let mut quiet = 0u64;
    let mut round = 0u64;
    while quiet < quiet_needed {
        if round >= cap {
            return Err(ConsensusError::NonConvergence { rounds: round, disagreements: disagreements(&states, graph) });
        }
        round += 1;
        let built: Vec<bool> = states
            .par_iter_mut()
            .zip(dirty.par_iter())
            .enumerate()
            .map(|(i, (s, &d))| {
                s.t[i] = round;
                d && build_bundle(s, &agents[i], items, scorer)
            })
            .collect();
        let snapshot = states.clone();
        let merged: Vec<Result<bool, AuctionError>> = states
            .par_iter_mut()
            .enumerate()
            .map(|(i, s)| {
                let mut changed = false;
                for &k in &neighbours[i] {
                    changed |= apply_message(s, &snapshot[k], round, items)?;
                }
                Ok(changed)
            })
            .collect();
        let mut any = false;
        for (i, m) in merged.into_iter().enumerate() {
            let m = m?;
            dirty[i] = m;
            any |= m || built[i];
        }
        if any {
            quiet = 0;
            report.rounds = round;
        } else {
            quiet += 1;
        }
    }
    report.rounds_executed = round;
    report.messages = links * report.rounds;
    let labels = graph.components();
    report.components = labels.iter().copied().max().map_or(0, |c| c + 1);
    report.double_assignments = double_assignments(&states);
    let disputed = disagreements(&states, graph);
    if !disputed.is_empty() {
        return Err(ConsensusError::NonConvergence { rounds: round, disagreements: disputed });
    }
    Ok(ConsensusOutcome { states, report })
}

/// Items on which agents of the same component hold different `(y, z)`.
pub fn disagreements(states: &[BidState], graph: &CommGraph) -> Vec<Disagreement> {
    let labels = graph.components();
    let m = states.first().map_or(0, |s| s.y.len());
    (0..m)
        .filter(|&j| {
            states.iter().any(|a| {
                states.iter().any(|b| labels[a.agent] == labels[b.agent] && (a.y[j] != b.y[j] || a.z[j] != b.z[j]))
            })
        })
        .map(|j| Disagreement { item: j, beliefs: states.iter().map(|s| (s.agent, s.z[j], s.y[j])).collect() })
        .collect()
}

/// Items that more than one agent holds in its bundle.
pub fn double_assignments(states: &[BidState]) -> Vec<usize> {
    let m = states.first().map_or(0, |s| s.y.len());
    (0..m).filter(|&j| states.iter().filter(|s| s.x[j]).count() > 1).collect()
}
