//! Pre-auction task processing: splitting oversized tasks and clustering
//! nearby tasks into groups that are auctioned as single meta-tasks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Agent, CargoType, GridPoint, Task, TaskGroup, TaskId};
use crate::geometry::{snap_to_aisle, CostModel, WarehouseLayout};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrepError {
    #[error("no agents to size subtasks against")]
    NoAgents,
    #[error("minimum agent capacity must be positive")]
    ZeroCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingConfig {
    /// Cap on the summed demand of one group.
    pub request_group: u32,
}

impl GroupingConfig {
    /// Whether any two tasks with these requests could ever share a group.
    pub fn allows_merging(&self, tasks: &[Task]) -> bool {
        let min = tasks.iter().map(|t| t.request).min().unwrap_or(0);
        min > 0 && self.request_group >= 2 * min
    }
}

/// Splits every task whose request exceeds the largest agent capacity into
/// chunks of the smallest capacity, the last chunk carrying the remainder.
///
/// The first chunk keeps the original id; further chunks get fresh ids past
/// the current maximum and are appended in input order. Chunk values are
/// proportional to chunk requests.
pub fn decompose(tasks: &[Task], agents: &[Agent]) -> Result<Vec<Task>, PrepError> {
    let max_cap = agents.iter().map(|a| a.capacity).max().ok_or(PrepError::NoAgents)?;
    let min_cap = agents.iter().map(|a| a.capacity).min().ok_or(PrepError::NoAgents)?;
    if min_cap == 0 {
        return Err(PrepError::ZeroCapacity);
    }
    let mut next_id = tasks.iter().map(|t| t.id.0 + 1).max().unwrap_or(0);
    let mut out: Vec<Task> = Vec::with_capacity(tasks.len());
    let mut extra = Vec::new();
    for task in tasks {
        if task.request <= max_cap {
            out.push(task.clone());
            continue;
        }
        let x = task.request.div_ceil(min_cap);
        for k in 0..x {
            let request = if k + 1 == x { task.request - (x - 1) * min_cap } else { min_cap };
            let mut chunk = task.clone();
            chunk.request = request;
            chunk.value = task.value * f64::from(request) / f64::from(task.request);
            if k == 0 {
                out.push(chunk);
            } else {
                chunk.id = TaskId(next_id);
                next_id += 1;
                extra.push(chunk);
            }
        }
    }
    out.extend(extra);
    Ok(out)
}

/// Result of grouping: meta-task `k` is `groups[k].meta_task` and has id `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub groups: Vec<TaskGroup>,
}

impl Grouping {
    pub fn meta_tasks(&self) -> Vec<Task> {
        self.groups.iter().map(|g| g.meta_task.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// One singleton group per task, ordered by task id. The meta-task is the
/// task itself with its id replaced by the group index.
pub fn identity_grouping(tasks: &[Task]) -> Grouping {
    let mut sorted: Vec<&Task> = tasks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    let groups = sorted
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            let mut meta = t.clone();
            meta.id = TaskId(k as u32);
            TaskGroup { group_id: k as u32, member_ids: vec![t.id], meta_task: meta }
        })
        .collect();
    Grouping { groups }
}

/// Summed pickup-to-delivery cost of doing each task on its own.
pub fn single_task_cycle(tasks: &[&Task], cost: &CostModel) -> f64 {
    tasks.iter().map(|t| cost.cost(t.position_start, t.position_end)).sum()
}

/// Cost of a greedy nearest-neighbour tour over the pickups and deliveries
/// of `tasks`, starting at the first task's pickup. A delivery becomes
/// eligible once its pickup has been visited. Ties go to the earlier task,
/// pickup before delivery.
pub fn all_tasks_cycle(tasks: &[&Task], cost: &CostModel) -> f64 {
    let Some(first) = tasks.first() else { return 0.0 };
    let n = tasks.len();
    let mut picked = vec![false; n];
    let mut delivered = vec![false; n];
    picked[0] = true;
    let mut pos = first.position_start;
    let mut total = 0.0;
    for _ in 1..2 * n {
        let mut best: Option<(f64, usize, bool)> = None;
        for (k, t) in tasks.iter().enumerate() {
            let candidate = if !picked[k] {
                Some((t.position_start, false))
            } else if !delivered[k] {
                Some((t.position_end, true))
            } else {
                None
            };
            if let Some((p, is_delivery)) = candidate {
                let d = cost.cost(pos, p);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, k, is_delivery));
                }
            }
        }
        let (d, k, is_delivery) = best.expect("unvisited target remains");
        total += d;
        if is_delivery {
            delivered[k] = true;
            pos = tasks[k].position_end;
        } else {
            picked[k] = true;
            pos = tasks[k].position_start;
        }
    }
    total
}

fn centroid<'a>(points: impl Iterator<Item = &'a GridPoint>, layout: &WarehouseLayout) -> GridPoint {
    let (mut sx, mut sy, mut n) = (0i64, 0i64, 0i64);
    for p in points {
        sx += i64::from(p.x);
        sy += i64::from(p.y);
        n += 1;
    }
    let (cx, cy) = ((sx as f64 / n as f64).round() as i32, (sy as f64 / n as f64).round() as i32);
    snap_to_aisle(GridPoint::new(cx, cy), layout)
}

/// Nearest candidate (by pickup, from the group's pickup centroid) of the
/// group's cargo type needing at most `room`. Ties go to the lowest id.
fn nearest_task(group: &[&Task], pool: &[&Task], room: u32, cargo: CargoType, cost: &CostModel) -> Option<usize> {
    let from = centroid(group.iter().map(|t| &t.position_start), cost.layout());
    let mut best: Option<(f64, TaskId, usize)> = None;
    for (k, t) in pool.iter().enumerate() {
        if t.cargo_type != cargo || t.request > room {
            continue;
        }
        let d = cost.cost(from, t.position_start);
        if best.is_none_or(|(bd, bid, _)| d < bd || (d == bd && t.id < bid)) {
            best = Some((d, t.id, k));
        }
    }
    best.map(|(_, _, k)| k)
}

/// Greedy absorption sequence of `seed` over `pool` (which excludes it):
/// each absorbed id with the group's saving right after absorbing it.
/// `prefix` holds steps already taken; absorbed tasks must not be in `pool`.
fn trajectory<'a>(
    seed: &'a Task,
    prefix: Vec<(TaskId, f64)>,
    absorbed: Vec<&'a Task>,
    mut pool: Vec<&'a Task>,
    request_group: u32,
    cost: &CostModel,
) -> Vec<(TaskId, f64)> {
    let mut group: Vec<&Task> = std::iter::once(seed).chain(absorbed).collect();
    let mut total: u32 = group.iter().map(|t| t.request).sum();
    let mut out = prefix;
    while total < request_group {
        let Some(k) = nearest_task(&group, &pool, request_group - total, seed.cargo_type, cost) else {
            break;
        };
        let next = pool.remove(k);
        total += next.request;
        group.push(next);
        out.push((next.id, all_tasks_cycle(&group, cost) - single_task_cycle(&group, cost)));
    }
    out
}

/// Picks the best group from per-seed trajectories in ascending seed order.
fn best_group<'a>(seeds: impl Iterator<Item = (TaskId, &'a [(TaskId, f64)])>) -> Vec<TaskId> {
    let mut best_saving = 0.0;
    let mut best: Option<Vec<TaskId>> = None;
    let mut lowest = None;
    for (seed, steps) in seeds {
        lowest.get_or_insert(seed);
        for (n, &(_, saving)) in steps.iter().enumerate() {
            if saving < best_saving {
                best_saving = saving;
                best = Some(std::iter::once(seed).chain(steps[..=n].iter().map(|s| s.0)).collect());
            }
        }
    }
    best.or_else(|| lowest.map(|id| vec![id])).unwrap_or_default()
}

/// Finds the most cost-saving group among `tasks`.
///
/// Each task in ascending id order seeds a group that greedily absorbs the
/// nearest fitting task of its type. After every absorption the saving
/// `all_tasks_cycle(group) - single_task_cycle(group)` is compared with the
/// best so far; only strictly negative savings count. When nothing saves,
/// the lowest-id task forms a singleton. Returns the ids of the chosen group
/// in absorption order.
pub fn nearest_group(tasks: &[&Task], request_group: u32, cost: &CostModel) -> Vec<TaskId> {
    let mut seeds: Vec<&Task> = tasks.to_vec();
    seeds.sort_by_key(|t| t.id);
    let trajectories: Vec<(TaskId, Vec<(TaskId, f64)>)> = seeds
        .iter()
        .map(|seed| {
            let pool: Vec<&Task> = seeds.iter().copied().filter(|t| t.id != seed.id).collect();
            (seed.id, trajectory(seed, Vec::new(), Vec::new(), pool, request_group, cost))
        })
        .collect();
    best_group(trajectories.iter().map(|(s, t)| (*s, t.as_slice())))
}

/// Builds the meta-task that stands in for `members` at auction.
///
/// Demand and value are summed; the window is the earliest start and the
/// earliest end; pickups and deliveries are averaged separately and snapped
/// to the nearest aisle cell.
pub fn meta_task(group_id: u32, members: &[&Task], layout: &WarehouseLayout) -> Task {
    let start = centroid(members.iter().map(|t| &t.position_start), layout);
    let end = centroid(members.iter().map(|t| &t.position_end), layout);
    Task {
        id: TaskId(group_id),
        position_start: start,
        position_end: end,
        time_start: members.iter().map(|t| t.time_start).fold(f64::INFINITY, f64::min),
        time_end: members.iter().map(|t| t.time_end).fold(f64::INFINITY, f64::min),
        request: members.iter().map(|t| t.request).sum(),
        cargo_type: members[0].cargo_type,
        value: members.iter().map(|t| t.value).sum(),
    }
}

/// Partitions `tasks` by repeated [`nearest_group`] calls until none remain.
///
/// A task whose request alone exceeds the cap becomes a singleton group.
pub fn group(tasks: &[Task], config: GroupingConfig, cost: &CostModel) -> Grouping {
    let mut remaining: Vec<&Task> = tasks.iter().collect();
    remaining.sort_by_key(|t| t.id);
    // A seed's trajectory only changes from the first absorbed task that
    // gets taken: removing any other task leaves every nearest-task choice
    // intact, so the prefix before it stays valid.
    let mut cache: BTreeMap<TaskId, Vec<(TaskId, f64)>> = BTreeMap::new();
    let mut groups = Vec::new();
    while !remaining.is_empty() {
        let by_id: BTreeMap<TaskId, &Task> = remaining.iter().map(|t| (t.id, *t)).collect();
        let stale: Vec<(&Task, Vec<(TaskId, f64)>)> = remaining
            .iter()
            .filter_map(|seed| match cache.get(&seed.id) {
                None => Some((*seed, Vec::new())),
                Some(steps) => {
                    let live = steps.iter().take_while(|(id, _)| by_id.contains_key(id)).count();
                    (live < steps.len()).then(|| (*seed, steps[..live].to_vec()))
                }
            })
            .collect();
        let rebuilt: Vec<(TaskId, Vec<(TaskId, f64)>)> = stale
            .into_par_iter()
            .map(|(seed, kept)| {
                let absorbed: Vec<&Task> = kept.iter().map(|(id, _)| by_id[id]).collect();
                let pool: Vec<&Task> = remaining
                    .iter()
                    .copied()
                    .filter(|t| t.id != seed.id && !kept.iter().any(|(id, _)| *id == t.id))
                    .collect();
                (seed.id, trajectory(seed, kept, absorbed, pool, config.request_group, cost))
            })
            .collect();
        cache.extend(rebuilt);
        let ids = best_group(cache.iter().map(|(s, t)| (*s, t.as_slice())));
        let members: Vec<&Task> =
            ids.iter().map(|id| *remaining.iter().find(|t| t.id == *id).expect("member is unassigned")).collect();
        let group_id = groups.len() as u32;
        let meta = if members.len() == 1 {
            let mut m = members[0].clone();
            m.id = TaskId(group_id);
            m
        } else {
            meta_task(group_id, &members, cost.layout())
        };
        remaining.retain(|t| !ids.contains(&t.id));
        for id in &ids {
            cache.remove(id);
        }
        groups.push(TaskGroup { group_id, member_ids: ids, meta_task: meta });
    }
    Grouping { groups }
}
