//! Quality aggregation over a composition and the per-task fitness.
//!
//! Raw criteria are (MT, SIM, A, R, T, CT). MT multiplies the match scores
//! of every link, SIM averages link similarities, A and R multiply over the
//! services, T is the critical-path response time and CT sums cost. Raw
//! values are min-max normalised against repository-wide bounds, with time
//! and cost normalised descending.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::{decode, CompositionDag, DecodeError, Node, Permutation};
use crate::model::{QosmInterval, ServiceRepository, TaskSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QualityVector {
    pub mt: f64,
    pub sim: f64,
    pub availability: f64,
    pub reliability: f64,
    /// Critical-path response time (ms).
    pub time: f64,
    pub cost: f64,
}

pub fn raw_quality(repo: &ServiceRepository, dag: &CompositionDag) -> QualityVector {
    let (mut mt, mut sim_sum) = (1.0, 0.0);
    for e in &dag.edges {
        mt *= e.degree.score();
        sim_sum += e.similarity;
    }
    let sim = if dag.edges.is_empty() {
        1.0
    } else {
        sim_sum / dag.edges.len() as f64
    };

    let (mut availability, mut reliability, mut cost) = (1.0, 1.0, 0.0);
    for &s in &dag.services {
        let q = repo.service(s).qos;
        availability *= q.availability;
        reliability *= q.reliability;
        cost += q.cost;
    }

    // longest path over the admission (topological) order
    let mut finish: HashMap<Node, f64> = HashMap::with_capacity(dag.services.len() + 2);
    finish.insert(Node::Start, 0.0);
    let ready = |node: Node, finish: &HashMap<Node, f64>| {
        dag.incoming(node)
            .map(|e| finish.get(&e.from).copied().unwrap_or(0.0))
            .fold(0.0, f64::max)
    };
    for &s in &dag.services {
        let t = ready(Node::Service(s), &finish) + repo.service(s).qos.time;
        finish.insert(Node::Service(s), t);
    }
    let time = ready(Node::End, &finish);

    QualityVector {
        mt,
        sim,
        availability,
        reliability,
        time,
        cost,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub min: f64,
    pub max: f64,
}

impl Bound {
    fn ascending(&self, v: f64) -> f64 {
        if self.max - self.min == 0.0 {
            1.0
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }

    fn descending(&self, v: f64) -> f64 {
        if self.max - self.min == 0.0 {
            1.0
        } else {
            ((self.max - v) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub mt: Bound,
    pub sim: Bound,
    pub availability: Bound,
    pub reliability: Bound,
    pub time: Bound,
    pub cost: Bound,
}

/// Repository-wide normalisation bounds.
///
/// MT and SIM use (0, 1). A and R range from the product over all services
/// up to the best single service; T and CT from the best single service up
/// to the sum over all services.
pub fn bounds(repo: &ServiceRepository) -> NormalizationBounds {
    let qs = || repo.services().iter().map(|s| s.qos);
    let product = |f: fn(&crate::model::Qos) -> f64| qs().map(|q| f(&q)).product::<f64>();
    let max = |f: fn(&crate::model::Qos) -> f64| qs().map(|q| f(&q)).fold(f64::NEG_INFINITY, f64::max);
    let min = |f: fn(&crate::model::Qos) -> f64| qs().map(|q| f(&q)).fold(f64::INFINITY, f64::min);
    let sum = |f: fn(&crate::model::Qos) -> f64| qs().map(|q| f(&q)).sum::<f64>();
    let unit = Bound { min: 0.0, max: 1.0 };
    NormalizationBounds {
        mt: unit,
        sim: unit,
        availability: Bound {
            min: product(|q| q.availability),
            max: max(|q| q.availability),
        },
        reliability: Bound {
            min: product(|q| q.reliability),
            max: max(|q| q.reliability),
        },
        time: Bound {
            min: min(|q| q.time),
            max: sum(|q| q.time),
        },
        cost: Bound {
            min: min(|q| q.cost),
            max: sum(|q| q.cost),
        },
    }
}

/// Normalised criteria, each in [0, 1]. `time` and `cost` are already
/// inverted (1 is fastest / cheapest).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Normalized {
    pub mt: f64,
    pub sim: f64,
    pub availability: f64,
    pub reliability: f64,
    pub time: f64,
    pub cost: f64,
}

pub fn normalize(q: &QualityVector, b: &NormalizationBounds) -> Normalized {
    Normalized {
        mt: b.mt.ascending(q.mt),
        sim: b.sim.ascending(q.sim),
        availability: b.availability.ascending(q.availability),
        reliability: b.reliability.ascending(q.reliability),
        time: b.time.descending(q.time),
        cost: b.cost.descending(q.cost),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("weights must be finite and non-negative")]
    Negative,
    #[error("comprehensive weights sum to {0}, expected 1")]
    ComprehensiveSum(f64),
    #[error("QoSM weights sum to {0}, expected 1")]
    QosmSum(f64),
}

/// `mt..cost` weight the comprehensive quality; `qosm_mt` and `qosm_sim`
/// weight QoSM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub mt: f64,
    pub sim: f64,
    pub availability: f64,
    pub reliability: f64,
    pub time: f64,
    pub cost: f64,
    pub qosm_mt: f64,
    pub qosm_sim: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            mt: 0.25,
            sim: 0.25,
            availability: 0.125,
            reliability: 0.125,
            time: 0.125,
            cost: 0.125,
            qosm_mt: 0.5,
            qosm_sim: 0.5,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), WeightsError> {
        let all = [
            self.mt,
            self.sim,
            self.availability,
            self.reliability,
            self.time,
            self.cost,
            self.qosm_mt,
            self.qosm_sim,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(WeightsError::Negative);
        }
        let comprehensive: f64 = all[..6].iter().sum();
        if (comprehensive - 1.0).abs() > 1e-9 {
            return Err(WeightsError::ComprehensiveSum(comprehensive));
        }
        let q = self.qosm_mt + self.qosm_sim;
        if (q - 1.0).abs() > 1e-9 {
            return Err(WeightsError::QosmSum(q));
        }
        Ok(())
    }
}

/// Comprehensive quality F.
///
/// With `literal_time_cost` the time and cost terms are `w * (1 - n)` on the
/// already-inverted normalised values, exactly as the weighted sum is
/// usually written; otherwise they are `w * n`.
pub fn comprehensive(n: &Normalized, w: &Weights, literal_time_cost: bool) -> f64 {
    let (t, c) = if literal_time_cost {
        (1.0 - n.time, 1.0 - n.cost)
    } else {
        (n.time, n.cost)
    };
    w.mt * n.mt
        + w.sim * n.sim
        + w.availability * n.availability
        + w.reliability * n.reliability
        + w.time * t
        + w.cost * c
}

pub fn qosm(n: &Normalized, w: &Weights) -> f64 {
    w.qosm_mt * n.mt + w.qosm_sim * n.sim
}

/// Distance of `qosm_value` from the segment; only meaningful outside it.
pub fn violation(qosm_value: f64, cons: &QosmInterval) -> f64 {
    if qosm_value <= cons.lo() {
        cons.lo() - qosm_value
    } else {
        qosm_value - cons.hi()
    }
}

/// Above 0.5 iff feasible (for F > 0); infeasible solutions are pushed below
/// 0.5 proportionally to their violation.
pub fn fitness(f: f64, qosm_value: f64, cons: &QosmInterval) -> f64 {
    if cons.contains(qosm_value) {
        0.5 + 0.5 * f
    } else {
        0.5 * f - 0.5 * violation(qosm_value, cons)
    }
}

/// Sparse per-task fitness. `None` marks an unevaluated task.
#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct FactorialCosts(Vec<Option<f64>>);

impl FactorialCosts {
    pub fn unevaluated(k: usize) -> Self {
        Self(vec![None; k])
    }

    pub fn get(&self, j: usize) -> Option<f64> {
        self.0[j]
    }

    pub fn set(&mut self, j: usize, value: f64) {
        self.0[j] = Some(value);
    }

    pub fn is_evaluated(&self, j: usize) -> bool {
        self.0[j].is_some()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn evaluated(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().enumerate().filter_map(|(j, c)| c.map(|c| (j, c)))
    }

    pub fn evaluated_count(&self) -> usize {
        self.0.iter().filter(|c| c.is_some()).count()
    }
}

/// Fitness on each task in `eval_set` from a single (F, QoSM) pair.
pub fn factorial_costs(f: f64, qosm_value: f64, tasks: &TaskSet, eval_set: &[usize]) -> FactorialCosts {
    let mut costs = FactorialCosts::unevaluated(tasks.len());
    for &j in eval_set {
        costs.set(j, fitness(f, qosm_value, &tasks.task(j).cons));
    }
    costs
}

/// Everything computed from decoding one permutation. Task independent.
#[derive(Clone, Debug, PartialEq)]
pub struct Assessment {
    pub dag: CompositionDag,
    pub raw: QualityVector,
    pub normalized: Normalized,
    pub comprehensive: f64,
    pub qosm: f64,
}

/// Decodes and scores permutations against one task set.
#[derive(Clone, Debug)]
pub struct Evaluator<'a> {
    pub repo: &'a ServiceRepository,
    pub tasks: &'a TaskSet,
    pub bounds: NormalizationBounds,
    pub weights: Weights,
    pub literal_time_cost: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(repo: &'a ServiceRepository, tasks: &'a TaskSet, weights: Weights, literal_time_cost: bool) -> Self {
        Self {
            repo,
            tasks,
            bounds: bounds(repo),
            weights,
            literal_time_cost,
        }
    }

    pub fn assess(&self, permutation: &Permutation) -> Result<Assessment, DecodeError> {
        // all tasks share inputs and outputs, so one decode serves every task
        let dag = decode(self.repo, self.tasks.task(0), permutation)?;
        Ok(self.assess_dag(dag))
    }

    pub fn assess_dag(&self, dag: CompositionDag) -> Assessment {
        let raw = raw_quality(self.repo, &dag);
        let normalized = normalize(&raw, &self.bounds);
        Assessment {
            comprehensive: comprehensive(&normalized, &self.weights, self.literal_time_cost),
            qosm: qosm(&normalized, &self.weights),
            dag,
            raw,
            normalized,
        }
    }

    pub fn fitness(&self, a: &Assessment, task: usize) -> f64 {
        fitness(a.comprehensive, a.qosm, &self.tasks.task(task).cons)
    }
}
