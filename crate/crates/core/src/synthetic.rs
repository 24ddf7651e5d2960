//! Seeded generator for solvable composition instances.
//!
//! A backbone chain of services from the task inputs to the task outputs is
//! laid down first, so every generated task is solvable. The remaining
//! services are distractors: some are QoS/semantic variants of backbone
//! stages (alternative providers), the rest are random.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{validate_task, ConceptId, ModelError, Ontology, Qos, Service, ServiceRepository, TaskSet};

/// Upper limit on generated taxonomy size.
const MAX_CONCEPTS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n_services: usize,
    /// Number of taxonomy levels including the root.
    pub taxonomy_depth: usize,
    pub branching: usize,
    /// Number of QoSM segments (tasks).
    pub k: usize,
    pub seed: u64,
}

impl SyntheticParams {
    fn check(&self) -> Result<usize, ModelError> {
        if self.n_services < 2 {
            return Err(ModelError::Parameter(format!(
                "n_services = {} (need >= 2)",
                self.n_services
            )));
        }
        if self.k < 1 {
            return Err(ModelError::Parameter("K must be >= 1".into()));
        }
        if self.taxonomy_depth < 2 {
            return Err(ModelError::Parameter(format!(
                "taxonomy depth = {} (need >= 2)",
                self.taxonomy_depth
            )));
        }
        if self.branching < 2 {
            return Err(ModelError::Parameter(format!(
                "branching = {} (need >= 2)",
                self.branching
            )));
        }
        let mut total = 1usize;
        let mut level = 1usize;
        for _ in 1..self.taxonomy_depth {
            level = level.saturating_mul(self.branching);
            total = total.saturating_add(level);
            if total > MAX_CONCEPTS {
                return Err(ModelError::Parameter(format!(
                    "taxonomy with depth {} and branching {} exceeds {MAX_CONCEPTS} concepts",
                    self.taxonomy_depth, self.branching
                )));
            }
        }
        Ok(total)
    }
}

fn full_tree(depth: usize, branching: usize) -> Ontology {
    let mut edges = Vec::new();
    let mut level = vec!["Thing".to_string()];
    let mut next_id = 1usize;
    for _ in 1..depth {
        let mut next = Vec::with_capacity(level.len() * branching);
        for parent in &level {
            for _ in 0..branching {
                let child = format!("C{next_id}");
                next_id += 1;
                edges.push((parent.clone(), child.clone()));
                next.push(child);
            }
        }
        level = next;
    }
    Ontology::from_edges("Thing", &edges).expect("generated tree is valid")
}

struct Gen<'a> {
    ont: &'a Ontology,
    rng: ChaCha8Rng,
    children: Vec<Vec<ConceptId>>,
}

impl Gen<'_> {
    fn any_concept(&mut self) -> ConceptId {
        let n = self.ont.len();
        ConceptId::from_index(self.rng.random_range(1..n))
    }

    /// A random strict ancestor below the root, or `c` itself if none.
    fn generalize(&mut self, c: ConceptId) -> ConceptId {
        let options: Vec<ConceptId> = self
            .ont
            .ancestors(c)
            .skip(1)
            .filter(|a| *a != self.ont.root())
            .collect();
        options.choose(&mut self.rng).copied().unwrap_or(c)
    }

    /// A random strict descendant, or `c` itself for a leaf.
    fn specialize(&mut self, c: ConceptId) -> ConceptId {
        let mut cur = c;
        let steps = self.rng.random_range(1..=2);
        for _ in 0..steps {
            match self.children[cur.index()].choose(&mut self.rng) {
                Some(&k) => cur = k,
                None => break,
            }
        }
        cur
    }

    fn qos(&mut self) -> Qos {
        let round = |v: f64, scale: f64| (v * scale).round() / scale;
        Qos {
            availability: round(self.rng.random_range(0.85..0.999), 1e4),
            reliability: round(self.rng.random_range(0.85..0.999), 1e4),
            time: round(self.rng.random_range(10.0..1000.0), 1e2),
            cost: round(self.rng.random_range(1.0..100.0), 1e2),
        }
    }
}

fn dedup(v: Vec<ConceptId>) -> Vec<ConceptId> {
    let mut seen = HashSet::new();
    v.into_iter().filter(|c| seen.insert(*c)).collect()
}

struct Stage {
    inputs: Vec<ConceptId>,
    outputs: Vec<ConceptId>,
}

/// Generates a repository and `k` tasks with evenly split QoSM segments.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<(ServiceRepository, TaskSet), ModelError> {
    params.check()?;
    let ont = full_tree(params.taxonomy_depth, params.branching);
    let mut children = vec![Vec::new(); ont.len()];
    for c in ont.ids() {
        if let Some(p) = ont.parent(c) {
            children[p.index()].push(c);
        }
    }
    let mut g = Gen {
        ont: &ont,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        children,
    };

    // Task inputs and outputs; no output may already be covered by an input.
    let first = g.any_concept();
    let second = g.any_concept();
    let candidates_for = |inputs: &[ConceptId]| -> Vec<ConceptId> {
        ont.ids()
            .skip(1)
            .filter(|&c| !inputs.iter().any(|&i| crate::semantics::subsumes(&ont, c, i)))
            .collect()
    };
    let mut task_inputs = if g.rng.random_bool(0.5) {
        dedup(vec![first, second])
    } else {
        vec![first]
    };
    let mut candidates = candidates_for(&task_inputs);
    if candidates.is_empty() {
        // two inputs can cover a tiny taxonomy; a single one never does
        task_inputs.truncate(1);
        candidates = candidates_for(&task_inputs);
    }
    if candidates.is_empty() {
        return Err(ModelError::Parameter("taxonomy too small to pick task outputs".into()));
    }
    let n_out = if candidates.len() > 1 && g.rng.random_bool(0.5) {
        2
    } else {
        1
    };
    let task_outputs: Vec<ConceptId> = candidates.choose_multiple(&mut g.rng, n_out).copied().collect();

    // Backbone.
    let stages_len = ((params.n_services.ilog2() + 1) as usize).min(params.n_services);
    let mut stages: Vec<Stage> = Vec::with_capacity(stages_len);
    let mut frontier = task_inputs.clone();
    let mut available = task_inputs.clone();
    for i in 0..stages_len {
        let mut inputs = vec![*frontier.choose(&mut g.rng).expect("frontier non-empty")];
        if g.rng.random_bool(0.4) {
            inputs.push(*available.choose(&mut g.rng).expect("non-empty"));
        }
        let inputs = dedup(
            inputs
                .into_iter()
                .map(|c| if g.rng.random_bool(0.4) { g.generalize(c) } else { c })
                .collect(),
        );
        let outputs = if i + 1 == stages_len {
            let mut outs: Vec<ConceptId> = task_outputs
                .iter()
                .map(|&c| if g.rng.random_bool(0.4) { g.specialize(c) } else { c })
                .collect();
            if g.rng.random_bool(0.3) {
                outs.push(g.any_concept());
            }
            dedup(outs)
        } else {
            let n = g.rng.random_range(1..=2);
            dedup((0..n).map(|_| g.any_concept()).collect())
        };
        available.extend(outputs.iter().copied());
        frontier = outputs.clone();
        stages.push(Stage { inputs, outputs });
    }

    // Distractors.
    let mut specs: Vec<(Vec<ConceptId>, Vec<ConceptId>)> =
        stages.iter().map(|s| (s.inputs.clone(), s.outputs.clone())).collect();
    while specs.len() < params.n_services {
        if g.rng.random_bool(0.5) {
            let idx = g.rng.random_range(0..stages.len());
            let (base_in, base_out) = (stages[idx].inputs.clone(), stages[idx].outputs.clone());
            let inputs = dedup(
                base_in
                    .into_iter()
                    .map(|c| match g.rng.random_range(0..3) {
                        0 => g.generalize(c),
                        1 => g.specialize(c),
                        _ => c,
                    })
                    .collect(),
            );
            let outputs = dedup(
                base_out
                    .into_iter()
                    .map(|c| match g.rng.random_range(0..3) {
                        0 => g.specialize(c),
                        1 => g.generalize(c),
                        _ => c,
                    })
                    .collect(),
            );
            specs.push((inputs, outputs));
        } else {
            let n_in = g.rng.random_range(1..=3);
            let n_out = g.rng.random_range(1..=3);
            let inputs = dedup((0..n_in).map(|_| g.any_concept()).collect());
            let outputs = dedup((0..n_out).map(|_| g.any_concept()).collect());
            specs.push((inputs, outputs));
        }
    }
    specs.shuffle(&mut g.rng);
    let services: Vec<Service> = specs
        .into_iter()
        .enumerate()
        .map(|(i, (inputs, outputs))| Service {
            id: format!("S{i}"),
            inputs,
            outputs,
            qos: g.qos(),
        })
        .collect();

    let repo = ServiceRepository::new(ont.clone(), services)?;
    let tasks = TaskSet::even_segments(task_inputs, task_outputs, params.k)?;
    if !tasks.tasks().iter().all(|t| validate_task(&repo, t)) {
        // unreachable by construction of the backbone
        return Err(ModelError::Task("generated task is not solvable".into()));
    }
    Ok((repo, tasks))
}

/// Appends a copy of every service with QoS perturbed by up to +-10%.
///
/// Approximates repository doubling when only a base repository exists.
pub fn duplicate_services(repo: &ServiceRepository, seed: u64) -> ServiceRepository {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut services = repo.services().to_vec();
    for s in repo.services() {
        let mut jitter = |v: f64| v * rng.random_range(0.9..1.1);
        let qos = Qos {
            availability: jitter(s.qos.availability).clamp(1e-6, 1.0),
            reliability: jitter(s.qos.reliability).clamp(1e-6, 1.0),
            time: jitter(s.qos.time).max(1e-6),
            cost: jitter(s.qos.cost).max(0.0),
        };
        let mut id = format!("{}_dup", s.id);
        while repo.position(&id).is_some() {
            id.push('_');
        }
        services.push(Service { id, qos, ..s.clone() });
    }
    ServiceRepository::new(repo.ontology().clone(), services).expect("duplicates of a valid repository are valid")
}
