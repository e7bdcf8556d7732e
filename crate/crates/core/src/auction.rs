//! Bundle construction, pairwise consensus and target ordering.
//!
//! Auction items are indexed `0..m` (meta-task ids from grouping) and agents
//! `0..n` (position in the fleet slice, which callers keep sorted by id, so
//! a lower index is a lower agent id).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Agent, BidState, OrderedTargetQueue, Target, TargetKind, Task, TaskId};
use crate::scoring::Scorer;
use crate::taskprep::Grouping;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuctionError {
    #[error("message for item {task} names agent {agent}, but only {n_agents} agents exist")]
    UnknownAgent { task: usize, agent: usize, n_agents: usize },
    #[error("bundle references unknown group {0}")]
    UnknownGroup(usize),
    #[error("group member {0} is not in the task list")]
    UnknownTask(TaskId),
    #[error("bid vectors have mismatched lengths")]
    Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Update,
    Reset,
    Leave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusAction {
    pub kind: ActionKind,
    pub task_index: usize,
}

/// Whether bid `(y_a, a)` beats bid `(y_b, b)`: higher value, then lower
/// agent index.
pub fn outbids(y_a: f64, a: usize, y_b: f64, b: usize) -> bool {
    y_a > y_b || (y_a == y_b && a < b)
}

/// Bid placed for a marginal gain: the gain rounded to a 1e-9 grid, so
/// agents evaluating the same gain through different summation orders
/// place equal bids.
pub fn bid_value(marginal: f64) -> f64 {
    (marginal * 1e9).round() / 1e9
}

/// Adds items to the bundle until none passes the bid filter.
///
/// Candidates must match the agent's cargo type, fit the remaining capacity
/// and admit a feasible insertion; their bid is [`bid_value`] of the marginal
/// gain of their best insertion and must strictly exceed the current winning bid. The
/// highest bid is taken each pass, ties going to the lower item index.
/// Returns whether anything was added.
pub fn build_bundle(state: &mut BidState, agent: &Agent, items: &[Task], scorer: &Scorer) -> bool {
    let mut changed = false;
    loop {
        let room = agent.capacity.saturating_sub(state.bundle_request);
        let path: Vec<&Task> = state.path.iter().map(|&k| &items[k]).collect();
        let mut best: Option<(usize, usize, f64)> = None;
        for (j, item) in items.iter().enumerate() {
            if state.x[j] || item.cargo_type != agent.cargo_type || item.request > room {
                continue;
            }
            let Some(choice) = scorer.best_insertion(agent, item, &path) else { continue };
            let c = bid_value(choice.marginal);
            if c > state.y[j] && best.is_none_or(|(_, _, bc)| c > bc) {
                best = Some((j, choice.index, c));
            }
        }
        let Some((j, index, c)) = best else { break };
        state.path.insert(index, j);
        state.bundle.push(j);
        state.x[j] = true;
        state.y[j] = c;
        state.z[j] = Some(state.agent);
        state.bundle_request += items[j].request;
        changed = true;
    }
    changed
}

/// Rule-table decision for one item, from the receiver `i`'s point of view
/// on a message from `k`. `t_k` and `t_i` are the timestamp vectors before
/// the message is merged.
#[allow(clippy::too_many_arguments)]
pub fn rule(
    i: usize,
    k: usize,
    z_k: Option<usize>,
    z_i: Option<usize>,
    y_k: f64,
    y_i: f64,
    t_k: &[u64],
    t_i: &[u64],
) -> ActionKind {
    use ActionKind::{Leave, Reset, Update};
    let newer = |m: usize| t_k[m] > t_i[m];
    match z_k {
        Some(zk) if zk == k => match z_i {
            Some(zi) if zi == i => {
                if outbids(y_k, k, y_i, i) {
                    Update
                } else {
                    Leave
                }
            }
            Some(zi) if zi == k => Update,
            Some(m) => {
                if newer(m) || outbids(y_k, k, y_i, m) {
                    Update
                } else {
                    Leave
                }
            }
            None => Update,
        },
        Some(zk) if zk == i => match z_i {
            Some(zi) if zi == i => Leave,
            Some(zi) if zi == k => Reset,
            Some(m) => {
                if newer(m) {
                    Reset
                } else {
                    Leave
                }
            }
            None => Leave,
        },
        Some(m) => match z_i {
            Some(zi) if zi == i => {
                if newer(m) && outbids(y_k, m, y_i, i) {
                    Update
                } else {
                    Leave
                }
            }
            Some(zi) if zi == k => {
                if newer(m) {
                    Update
                } else {
                    Reset
                }
            }
            Some(zi) if zi == m => {
                if newer(m) {
                    Update
                } else {
                    Leave
                }
            }
            Some(n) => {
                // fresher news of n settles the receiver's belief in n
                if (newer(n) && t_k[m] >= t_i[m]) || (newer(m) && outbids(y_k, m, y_i, n)) {
                    Update
                } else if newer(n) && t_i[m] > t_k[m] {
                    Reset
                } else {
                    Leave
                }
            }
            None => {
                if newer(m) {
                    Update
                } else {
                    Leave
                }
            }
        },
        None => match z_i {
            Some(zi) if zi == i => Leave,
            Some(zi) if zi == k => Update,
            Some(m) => {
                if newer(m) {
                    Update
                } else {
                    Leave
                }
            }
            None => Leave,
        },
    }
}

/// Merges a message from `sender` into `receiver` at logical time `now`.
///
/// Decisions use the timestamps from before the merge; afterwards the
/// receiver's entry for the sender becomes `now` and every other entry the
/// elementwise maximum. Returns the item indices whose `(y, z)` changed.
pub fn resolve(receiver: &mut BidState, sender: &BidState, now: u64) -> Result<Vec<usize>, AuctionError> {
    let n_agents = receiver.t.len();
    if sender.t.len() != n_agents || sender.y.len() != receiver.y.len() || sender.z.len() != receiver.z.len() {
        return Err(AuctionError::Shape);
    }
    for (task, z) in sender.z.iter().enumerate() {
        if let Some(agent) = *z {
            if agent >= n_agents {
                return Err(AuctionError::UnknownAgent { task, agent, n_agents });
            }
        }
    }
    let (i, k) = (receiver.agent, sender.agent);
    let mut modified = Vec::new();
    for j in 0..receiver.y.len() {
        let action = rule(i, k, sender.z[j], receiver.z[j], sender.y[j], receiver.y[j], &sender.t, &receiver.t);
        let (y, z) = match action {
            ActionKind::Update => (sender.y[j], sender.z[j]),
            ActionKind::Reset => (0.0, None),
            ActionKind::Leave => continue,
        };
        if y != receiver.y[j] || z != receiver.z[j] {
            receiver.y[j] = y;
            receiver.z[j] = z;
            modified.push(j);
        }
    }
    for m in 0..n_agents {
        if m != i {
            receiver.t[m] = receiver.t[m].max(sender.t[m]);
        }
    }
    receiver.t[k] = now;
    Ok(modified)
}

/// Drops `item` and every item added after it. Dropped items other than
/// `item` whose winner is still this agent have their bid cleared.
pub fn release_from(state: &mut BidState, item: usize, items: &[Task]) {
    let Some(pos) = state.bundle.iter().position(|&b| b == item) else { return };
    let dropped: Vec<usize> = state.bundle.drain(pos..).collect();
    for (n, &b) in dropped.iter().enumerate() {
        state.x[b] = false;
        if n > 0 && state.z[b] == Some(state.agent) {
            state.y[b] = 0.0;
            state.z[b] = None;
        }
    }
    state.path.retain(|p| !dropped.contains(p));
    state.bundle_request = state.bundle.iter().map(|&b| items[b].request).sum();
}

/// Releases from the first bundle entry this agent no longer wins.
/// Returns whether the bundle shrank.
pub fn release_lost(state: &mut BidState, items: &[Task]) -> bool {
    let lost = state.bundle.iter().copied().find(|&b| state.z[b] != Some(state.agent));
    match lost {
        Some(b) => {
            release_from(state, b, items);
            true
        }
        None => false,
    }
}

/// Applies one message: rule-table merge followed by suffix release.
/// Returns whether the receiver's `(y, z)` or bundle changed.
pub fn apply_message(receiver: &mut BidState, sender: &BidState, now: u64, items: &[Task]) -> Result<bool, AuctionError> {
    let modified = resolve(receiver, sender, now)?;
    let released = release_lost(receiver, items);
    Ok(!modified.is_empty() || released)
}

/// Expands won meta-tasks into member targets and orders them.
///
/// Each pass inserts the one target, at the one index, that maximizes the
/// summed position score of the whole sequence. A delivery is only a
/// candidate once its pickup is placed and only after it. Ties go to the
/// lexicographically smallest `(task id, kind)` sequence.
pub fn unpack_and_sort(
    won: &[usize],
    grouping: &Grouping,
    tasks: &BTreeMap<TaskId, &Task>,
    agent: &Agent,
    scorer: &Scorer,
) -> Result<OrderedTargetQueue, AuctionError> {
    let mut members: Vec<&Task> = Vec::new();
    for &g in won {
        let group = grouping.groups.get(g).ok_or(AuctionError::UnknownGroup(g))?;
        for id in &group.member_ids {
            members.push(tasks.get(id).copied().ok_or(AuctionError::UnknownTask(*id))?);
        }
    }
    members.sort_by_key(|t| t.id);
    let mut pending: Vec<Target> = Vec::with_capacity(2 * members.len());
    for t in &members {
        pending.push(Target::pickup(t));
        pending.push(Target::delivery(t));
    }
    let value: BTreeMap<TaskId, f64> = members.iter().map(|t| (t.id, t.value)).collect();

    let mut seq: Vec<Target> = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        let mut best: Option<(f64, usize, usize)> = None;
        for (p, target) in pending.iter().enumerate() {
            let lo = match target.kind {
                TargetKind::Pickup => 0,
                TargetKind::Delivery => {
                    let Some(at) = seq.iter().position(|s| s.task_id == target.task_id) else { continue };
                    at + 1
                }
            };
            for index in lo..=seq.len() {
                seq.insert(index, target.clone());
                let total = sequence_score(&seq, &value, agent, scorer);
                seq.remove(index);
                let better = match &best {
                    None => true,
                    Some((bt, bp, bi)) => {
                        total > *bt || (total == *bt && order_key(&seq, target, index) < order_key(&seq, &pending[*bp], *bi))
                    }
                };
                if better {
                    best = Some((total, p, index));
                }
            }
        }
        let (_, p, index) = best.expect("a pickup is always placeable");
        let target = pending.remove(p);
        seq.insert(index, target);
    }
    Ok(OrderedTargetQueue { agent_id: agent.id, targets: seq })
}

/// `(task id, kind)` sequence that results from inserting `target` at `index`.
fn order_key(seq: &[Target], target: &Target, index: usize) -> Vec<(TaskId, TargetKind)> {
    let mut key: Vec<(TaskId, TargetKind)> = seq.iter().map(|t| (t.task_id, t.kind)).collect();
    key.insert(index, (target.task_id, target.kind));
    key
}

/// Summed position score of visiting `seq` in order. The agent waits at a
/// pickup until its window opens.
pub fn sequence_score(seq: &[Target], value: &BTreeMap<TaskId, f64>, agent: &Agent, scorer: &Scorer) -> f64 {
    let mut pos = agent.position;
    let mut time = 0.0;
    let mut total = 0.0;
    for t in seq {
        let v = value.get(&t.task_id).copied().unwrap_or(0.0);
        total += scorer.position_score(agent, pos, t.position, v, time);
        time += scorer.cost(pos, t.position) / agent.velocity;
        if t.kind == TargetKind::Pickup {
            time = time.max(t.time_start);
        }
        pos = t.position;
    }
    total
}
