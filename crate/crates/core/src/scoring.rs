//! Time-discounted task rewards.
//!
//! Two reward shapes drive allocation:
//!
//! * the *insertion score* used while bidding, which rewards an early
//!   arrival at the pickup with `exp(-λ·arrival)` and the remaining slack at
//!   delivery with `ln(λ·slack + 1)`;
//! * the *position score* used while ordering the pickup and delivery
//!   targets of a won bundle, `value·exp(-λ·(travel + time_prev))`.
//!
//! Travel times are estimator distances divided by the agent's velocity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Agent, GridPoint, OrderedTargetQueue, TargetKind, Task, TaskLookup};
use crate::geometry::{CostModel, Estimator, WarehouseLayout};

/// Which form of the insertion score to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// Arrival time at the pickup is `max(time_prev + travel, time_start)`;
    /// the agent waits at the pickup when it is early.
    #[default]
    ArrivalTime,
    /// Elapsed times are divided by velocity together with the distance; no
    /// waiting at the pickup.
    Literal,
}

impl FromStr for ScoreVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arrival" | "arrival_time" => Ok(Self::ArrivalTime),
            "literal" => Ok(Self::Literal),
            other => Err(format!("unknown score variant `{other}`")),
        }
    }
}

impl fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ArrivalTime => "arrival_time",
            Self::Literal => "literal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub lambda: f64,
    pub estimator: Estimator,
    #[serde(default)]
    pub variant: ScoreVariant,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self { lambda: 0.1, estimator: Estimator::Warehouse, variant: ScoreVariant::ArrivalTime }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("lambda must lie in (0, 1], got {0}")]
    Lambda(f64),
}

impl ScoreParams {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.lambda > 0.0 && self.lambda <= 1.0 {
            Ok(())
        } else {
            Err(ScoreError::Lambda(self.lambda))
        }
    }
}

/// Where and when the preceding task of a queue finished.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEnd {
    pub position: GridPoint,
    pub time: f64,
}

impl QueueEnd {
    pub fn start(agent: &Agent) -> Self {
        Self { position: agent.position, time: 0.0 }
    }
}

/// Outcome of scoring one task after a given queue end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub score: f64,
    pub pickup_time: f64,
    pub completion_time: f64,
}

impl Insertion {
    pub fn end(&self, task: &Task) -> QueueEnd {
        QueueEnd { position: task.position_end, time: self.completion_time }
    }
}

/// Best place to insert a task into a bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertionChoice {
    pub index: usize,
    /// Total bundle score after insertion minus the total before.
    pub marginal: f64,
    pub total: f64,
}

/// Summary of executing a target queue under the insertion-score model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueEvaluation {
    pub score: f64,
    pub completion_time: f64,
    pub late_tasks: usize,
}

/// Scoring functions bound to a cost model.
#[derive(Debug, Clone)]
pub struct Scorer {
    params: ScoreParams,
    cost: CostModel,
}

impl Scorer {
    pub fn new(params: ScoreParams, layout: WarehouseLayout) -> Self {
        Self { cost: CostModel::new(params.estimator, layout), params }
    }

    pub fn params(&self) -> &ScoreParams {
        &self.params
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn cost(&self, a: GridPoint, b: GridPoint) -> f64 {
        self.cost.cost(a, b)
    }

    /// Score for doing `task` right after `prev`, or `None` when the
    /// delivery deadline cannot be met.
    pub fn insertion_score(&self, agent: &Agent, task: &Task, prev: QueueEnd) -> Option<Insertion> {
        let lambda = self.params.lambda;
        let v = agent.velocity;
        let approach = self.cost(prev.position, task.position_start);
        let carry = self.cost(task.position_start, task.position_end);
        match self.params.variant {
            ScoreVariant::ArrivalTime => {
                let pickup_time = (prev.time + approach / v).max(task.time_start);
                let completion_time = pickup_time + carry / v;
                let slack = task.time_end - completion_time;
                if slack < 0.0 {
                    return None;
                }
                let score = task.value * (-lambda * pickup_time).exp() * (lambda * slack).ln_1p();
                Some(Insertion { score, pickup_time, completion_time })
            }
            ScoreVariant::Literal => {
                let exponent = (approach + prev.time - task.time_start) / v;
                let slack = task.time_end - carry / v - approach / v - prev.time;
                if slack < 0.0 {
                    return None;
                }
                let score = task.value * (-lambda * exponent).exp() * (lambda * slack).ln_1p();
                Some(Insertion {
                    score,
                    pickup_time: prev.time + approach / v,
                    completion_time: prev.time + (approach + carry) / v,
                })
            }
        }
    }

    /// Scores each task of `tasks` executed in order from the agent's start.
    pub fn chain<'t>(&self, agent: &Agent, tasks: impl IntoIterator<Item = &'t Task>) -> Option<Vec<Insertion>> {
        let mut end = QueueEnd::start(agent);
        let mut out = Vec::new();
        for task in tasks {
            let ins = self.insertion_score(agent, task, end)?;
            end = ins.end(task);
            out.push(ins);
        }
        Some(out)
    }

    pub fn bundle_score(&self, agent: &Agent, tasks: &[&Task]) -> Option<f64> {
        self.chain(agent, tasks.iter().copied()).map(|c| c.iter().map(|i| i.score).sum())
    }

    /// Tries `task` at every index of `bundle` and keeps the one with the
    /// highest total bundle score. Ties go to the smallest index.
    ///
    /// Returns `None` when no index keeps every queue member on time, or
    /// when the bundle itself is already infeasible.
    pub fn best_insertion(&self, agent: &Agent, task: &Task, bundle: &[&Task]) -> Option<InsertionChoice> {
        // prefix[k]: queue end and cumulative score after bundle[..k]
        let mut prefix = Vec::with_capacity(bundle.len() + 1);
        let mut end = QueueEnd::start(agent);
        let mut acc = 0.0;
        prefix.push((end, acc));
        for t in bundle {
            let ins = self.insertion_score(agent, t, end)?;
            acc += ins.score;
            end = ins.end(t);
            prefix.push((end, acc));
        }
        let before = acc;

        let mut best: Option<InsertionChoice> = None;
        'index: for (index, &(start, base)) in prefix.iter().enumerate() {
            let Some(ins) = self.insertion_score(agent, task, start) else {
                continue;
            };
            let mut total = base + ins.score;
            let mut end = ins.end(task);
            for t in &bundle[index..] {
                match self.insertion_score(agent, t, end) {
                    Some(i) => {
                        total += i.score;
                        end = i.end(t);
                    }
                    None => continue 'index,
                }
            }
            if best.is_none_or(|b| total > b.total) {
                best = Some(InsertionChoice { index, marginal: total - before, total });
            }
        }
        best
    }

    /// Reward for reaching `target` from `from`, having finished the
    /// previous target at `order_time`.
    pub fn position_score(&self, agent: &Agent, from: GridPoint, target: GridPoint, value: f64, order_time: f64) -> f64 {
        let travel = self.cost(from, target) / agent.velocity;
        value * (-self.params.lambda * (travel + order_time)).exp()
    }

    /// Executes an ordered target queue with estimator travel times and sums
    /// the insertion-score reward of every task delivered on time. Late
    /// deliveries earn nothing and are counted.
    pub fn queue_score(&self, agent: &Agent, queue: &OrderedTargetQueue, tasks: &TaskLookup<'_>) -> QueueEvaluation {
        let lambda = self.params.lambda;
        let mut pos = agent.position;
        let mut time = 0.0;
        let mut pickups = std::collections::BTreeMap::new();
        let mut eval = QueueEvaluation::default();
        for target in &queue.targets {
            time += self.cost(pos, target.position) / agent.velocity;
            pos = target.position;
            match target.kind {
                TargetKind::Pickup => {
                    time = time.max(target.time_start);
                    pickups.insert(target.task_id, time);
                }
                TargetKind::Delivery => {
                    let Some(task) = tasks.get(&target.task_id) else { continue };
                    let picked = pickups.get(&target.task_id).copied().unwrap_or(time);
                    let slack = target.time_end - time;
                    if slack >= 0.0 {
                        eval.score += task.value * (-lambda * picked).exp() * (lambda * slack).ln_1p();
                    } else {
                        eval.late_tasks += 1;
                    }
                }
            }
        }
        eval.completion_time = time;
        eval
    }

    /// Sum of estimator distances along the queue, starting at the agent.
    pub fn queue_length(&self, agent: &Agent, queue: &OrderedTargetQueue) -> f64 {
        let mut pos = agent.position;
        let mut total = 0.0;
        for t in &queue.targets {
            total += self.cost(pos, t.position);
            pos = t.position;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgentId, CargoType, Target, TaskId};

    fn open_scorer(lambda: f64) -> Scorer {
        Scorer::new(
            ScoreParams { lambda, estimator: Estimator::Manhattan, variant: ScoreVariant::ArrivalTime },
            WarehouseLayout::open(40, 40),
        )
    }

    fn agent() -> Agent {
        Agent {
            id: AgentId(0),
            position: GridPoint::new(0, 0),
            capacity: 100,
            cargo_type: CargoType::GENERAL,
            velocity: 1.0,
        }
    }

    fn task(id: u32, pick: (i32, i32), del: (i32, i32), window: (f64, f64), value: f64) -> Task {
        Task {
            id: TaskId(id),
            position_start: GridPoint::new(pick.0, pick.1),
            position_end: GridPoint::new(del.0, del.1),
            time_start: window.0,
            time_end: window.1,
            request: 10,
            cargo_type: CargoType::GENERAL,
            value,
        }
    }

    #[test]
    fn insertion_score_matches_hand_evaluation() {
        // arrival at pickup 5, delivery 5 later, deadline 30 -> slack 20
        let s = open_scorer(0.1);
        let t = task(0, (5, 0), (5, 5), (0.0, 30.0), 10.0);
        let ins = s.insertion_score(&agent(), &t, QueueEnd::start(&agent())).unwrap();
        let expected = 10.0 * (-0.5f64).exp() * 3.0f64.ln();
        assert!((ins.score - expected).abs() < 1e-12);
        assert!((ins.score - 6.6634).abs() < 1e-4);
        assert_eq!(ins.pickup_time, 5.0);
        assert_eq!(ins.completion_time, 10.0);
    }

    #[test]
    fn zero_slack_scores_zero_and_negative_is_infeasible() {
        let s = open_scorer(0.1);
        let tight = task(0, (5, 0), (5, 5), (0.0, 10.0), 10.0);
        assert_eq!(s.insertion_score(&agent(), &tight, QueueEnd::start(&agent())).unwrap().score, 0.0);
        let late = task(0, (5, 0), (5, 5), (0.0, 9.5), 10.0);
        assert!(s.insertion_score(&agent(), &late, QueueEnd::start(&agent())).is_none());
    }

    #[test]
    fn early_arrival_waits_for_window() {
        let s = open_scorer(0.1);
        let t = task(0, (2, 0), (2, 2), (7.0, 50.0), 1.0);
        let ins = s.insertion_score(&agent(), &t, QueueEnd::start(&agent())).unwrap();
        assert_eq!(ins.pickup_time, 7.0);
        assert_eq!(ins.completion_time, 9.0);
    }

    #[test]
    fn literal_variant_divides_elapsed_time_by_velocity() {
        let s = Scorer::new(
            ScoreParams { lambda: 0.1, estimator: Estimator::Manhattan, variant: ScoreVariant::Literal },
            WarehouseLayout::open(40, 40),
        );
        let mut a = agent();
        a.velocity = 2.0;
        let t = task(0, (6, 0), (6, 4), (1.0, 20.0), 10.0);
        let prev = QueueEnd { position: GridPoint::new(0, 0), time: 3.0 };
        let ins = s.insertion_score(&a, &t, prev).unwrap();
        let exponent = (6.0 + 3.0 - 1.0) / 2.0;
        let slack = 20.0 - 4.0 / 2.0 - 6.0 / 2.0 - 3.0;
        let expected = 10.0 * (-0.1f64 * exponent).exp() * (0.1 * slack + 1.0f64).ln();
        assert!((ins.score - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_bundle_inserts_at_head() {
        let s = open_scorer(0.1);
        let t = task(0, (5, 0), (5, 5), (0.0, 30.0), 10.0);
        let choice = s.best_insertion(&agent(), &t, &[]).unwrap();
        assert_eq!(choice.index, 0);
        let direct = s.insertion_score(&agent(), &t, QueueEnd::start(&agent())).unwrap().score;
        assert_eq!(choice.marginal, direct);
    }

    #[test]
    fn closer_task_goes_first() {
        let s = open_scorer(0.1);
        let far = task(0, (20, 0), (20, 3), (0.0, 200.0), 10.0);
        let near = task(1, (2, 0), (2, 3), (0.0, 200.0), 10.0);
        let a = agent();
        // brute force both orders
        let near_first = s.bundle_score(&a, &[&near, &far]).unwrap();
        let far_first = s.bundle_score(&a, &[&far, &near]).unwrap();
        assert!(near_first > far_first);
        let choice = s.best_insertion(&a, &near, &[&far]).unwrap();
        assert_eq!(choice.index, 0);
        let before = s.bundle_score(&a, &[&far]).unwrap();
        assert!((choice.marginal - (near_first - before)).abs() < 1e-12);
    }

    #[test]
    fn insertion_that_breaks_a_member_deadline_is_infeasible() {
        let s = open_scorer(0.1);
        // member must be delivered by t=13 from a direct trip of 13
        let member = task(0, (10, 0), (10, 3), (0.0, 13.0), 10.0);
        let intruder = task(1, (0, 20), (0, 22), (0.0, 60.0), 10.0);
        let a = agent();
        assert!(s.best_insertion(&a, &member, &[]).is_some());
        // before the member the member is late; after it the tight intruder is late
        let tight_intruder = task(1, (0, 20), (0, 22), (0.0, 22.0), 10.0);
        assert!(s.best_insertion(&a, &tight_intruder, &[&member]).is_none());
        assert!(s.best_insertion(&a, &intruder, &[&member]).is_some());
    }

    #[test]
    fn position_score_examples() {
        let s = open_scorer(0.1);
        let a = agent();
        let p = GridPoint::new(0, 0);
        assert_eq!(s.position_score(&a, p, p, 7.5, 0.0), 7.5);
        let expected = 10.0 * (-1.0f64).exp();
        let got = s.position_score(&a, p, GridPoint::new(4, 0), 10.0, 6.0);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 3.6788).abs() < 1e-4);
        let doubled = open_scorer(0.2).position_score(&a, p, GridPoint::new(4, 0), 10.0, 6.0);
        assert!(doubled < got);
    }

    #[test]
    fn queue_score_of_single_task_matches_insertion_score() {
        let s = open_scorer(0.1);
        let t = task(3, (5, 0), (5, 5), (0.0, 30.0), 10.0);
        let q = OrderedTargetQueue { agent_id: AgentId(0), targets: vec![Target::pickup(&t), Target::delivery(&t)] };
        let tasks = vec![t.clone()];
        let lookup = crate::domain::index_tasks(&tasks);
        let eval = s.queue_score(&agent(), &q, &lookup);
        let direct = s.insertion_score(&agent(), &t, QueueEnd::start(&agent())).unwrap().score;
        assert!((eval.score - direct).abs() < 1e-12);
        assert_eq!(eval.late_tasks, 0);
        assert_eq!(s.queue_length(&agent(), &q), 10.0);
    }

    #[test]
    fn lambda_outside_unit_interval_is_rejected() {
        assert!(ScoreParams { lambda: 0.0, ..Default::default() }.validate().is_err());
        assert!(ScoreParams { lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(ScoreParams::default().validate().is_ok());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn score_decreases_with_arrival_and_increases_with_slack(
                value in 0.5f64..50.0,
                arrival in 0.0f64..100.0,
                delay in 0.5f64..20.0,
                slack in 0.5f64..100.0,
            ) {
                let lambda = 0.1;
                let f = |arr: f64, sl: f64| value * (-lambda * arr).exp() * (lambda * sl).ln_1p();
                prop_assert!(f(arrival + delay, slack) < f(arrival, slack));
                prop_assert!(f(arrival, slack + delay) > f(arrival, slack));
                // and the scorer agrees with the closed form
                let s = open_scorer(lambda);
                let t = task(0, (0, 0), (0, 1), (arrival, arrival + 1.0 + slack), value);
                let ins = s.insertion_score(&agent(), &t, QueueEnd::start(&agent())).unwrap();
                prop_assert!((ins.score - f(arrival, slack)).abs() <= 1e-9 * f(arrival, slack).abs().max(1.0));
            }

            #[test]
            fn scaling_values_keeps_the_chosen_index(
                xs in proptest::collection::vec((1i32..30, 1i32..30, 1i32..30, 1i32..30, 0.0f64..20.0), 1..4),
                new in (1i32..30, 1i32..30, 1i32..30, 1i32..30),
                scale in 0.1f64..20.0,
            ) {
                let s = open_scorer(0.1);
                let a = agent();
                let mk = |k: u32, (px, py, dx, dy, st): (i32, i32, i32, i32, f64), mult: f64| {
                    let mut t = task(k, (px, py), (dx, dy), (st, st + 400.0), 5.0 * mult);
                    if t.position_start == t.position_end { t.position_end.x += 1; }
                    t
                };
                let base: Vec<Task> = xs.iter().enumerate().map(|(k, x)| mk(k as u32, *x, 1.0)).collect();
                let scaled: Vec<Task> = xs.iter().enumerate().map(|(k, x)| mk(k as u32, *x, scale)).collect();
                let nt = (new.0, new.1, new.2, new.3, 0.0);
                let t1 = mk(99, nt, 1.0);
                let t2 = mk(99, nt, scale);
                let b1: Vec<&Task> = base.iter().collect();
                let b2: Vec<&Task> = scaled.iter().collect();
                let c1 = s.best_insertion(&a, &t1, &b1);
                let c2 = s.best_insertion(&a, &t2, &b2);
                prop_assert_eq!(c1.map(|c| c.index), c2.map(|c| c.index));
            }
        }
    }
}
