//! Comparison allocators sharing the scoring and geometry stack.

use crate::alloc::{consensus_queues, AllocError};
use crate::domain::{Agent, OrderedTargetQueue, Target, Task};
use crate::netsim::{ConsensusReport, GraphKind};
use crate::scoring::{QueueEnd, Scorer};
use crate::taskprep::{identity_grouping, Grouping};

/// The consensus auction with every task as its own item.
pub fn cbga_allocate(
    agents: &[Agent],
    tasks: &[Task],
    graph: GraphKind,
    graph_seed: u64,
    scorer: &Scorer,
    round_cap: Option<u64>,
) -> Result<(Vec<OrderedTargetQueue>, Grouping, ConsensusReport), AllocError> {
    let grouping = identity_grouping(tasks);
    let (queues, report) = consensus_queues(agents, tasks, &grouping, graph, graph_seed, scorer, round_cap)?;
    Ok((queues, grouping, report))
}

fn append(queue: &mut OrderedTargetQueue, task: &Task) {
    queue.targets.push(Target::pickup(task));
    queue.targets.push(Target::delivery(task));
}

/// Centralized nearest-pair greedy.
///
/// Repeatedly assigns the (agent, task) pair with the smallest estimator
/// cost from the agent's queue tail to the task pickup, among pairs that fit
/// the agent's cargo type and remaining capacity and still meet the task
/// deadline when appended. Ties go to the lower agent id, then task id.
/// `agents` must be sorted by id.
pub fn central_allocate(agents: &[Agent], tasks: &[Task], scorer: &Scorer) -> Vec<OrderedTargetQueue> {
    let mut sorted: Vec<&Task> = tasks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    let mut queues: Vec<OrderedTargetQueue> = agents.iter().map(|a| OrderedTargetQueue::empty(a.id)).collect();
    let mut tails: Vec<QueueEnd> = agents.iter().map(QueueEnd::start).collect();
    let mut load = vec![0u32; agents.len()];
    let mut taken = vec![false; sorted.len()];
    loop {
        let mut best: Option<(f64, usize, usize, QueueEnd)> = None;
        for (i, a) in agents.iter().enumerate() {
            for (j, t) in sorted.iter().enumerate() {
                if taken[j] || t.cargo_type != a.cargo_type || load[i] + t.request > a.capacity {
                    continue;
                }
                let d = scorer.cost(tails[i].position, t.position_start);
                if best.as_ref().is_some_and(|(bd, _, _, _)| d >= *bd) {
                    continue;
                }
                if let Some(ins) = scorer.insertion_score(a, t, tails[i]) {
                    best = Some((d, i, j, ins.end(t)));
                }
            }
        }
        let Some((_, i, j, end)) = best else { break };
        taken[j] = true;
        load[i] += sorted[j].request;
        tails[i] = end;
        append(&mut queues[i], sorted[j]);
    }
    queues
}

/// Priority round-robin: agents in ascending id order each claim their
/// nearest unclaimed task that fits their cargo type and remaining
/// capacity, until a full pass claims nothing. Time windows are ignored.
/// `agents` must be sorted by id.
pub fn ta_priority_allocate(agents: &[Agent], tasks: &[Task], scorer: &Scorer) -> Vec<OrderedTargetQueue> {
    let mut sorted: Vec<&Task> = tasks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    let mut queues: Vec<OrderedTargetQueue> = agents.iter().map(|a| OrderedTargetQueue::empty(a.id)).collect();
    let mut tails: Vec<_> = agents.iter().map(|a| a.position).collect();
    let mut load = vec![0u32; agents.len()];
    let mut taken = vec![false; sorted.len()];
    loop {
        let mut claimed = false;
        for (i, a) in agents.iter().enumerate() {
            let mut best: Option<(f64, usize)> = None;
            for (j, t) in sorted.iter().enumerate() {
                if taken[j] || t.cargo_type != a.cargo_type || load[i] + t.request > a.capacity {
                    continue;
                }
                let d = scorer.cost(tails[i], t.position_start);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
            if let Some((_, j)) = best {
                taken[j] = true;
                load[i] += sorted[j].request;
                tails[i] = sorted[j].position_end;
                append(&mut queues[i], sorted[j]);
                claimed = true;
            }
        }
        if !claimed {
            break;
        }
    }
    queues
}
