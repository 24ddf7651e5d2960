//! Domain types for semantic web service composition: the concept taxonomy,
//! the service repository, composition tasks and their QoSM segments.
//!
//! Everything here is immutable after construction and cheap to share across
//! threads. Concepts are interned into [`ConceptId`]s by the [`Ontology`];
//! a `ConceptId` is only ever handed out by the ontology that owns it.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while loading, parsing or validating model data.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown concept `{concept}` referenced by {referenced_by}")]
    UnknownConcept { concept: String, referenced_by: String },
    #[error("invalid ontology: {0}")]
    Ontology(String),
    #[error("invalid service `{service}`: {message}")]
    Service { service: String, message: String },
    #[error("invalid task: {0}")]
    Task(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
}

/// Interned concept handle. Only meaningful for the ontology that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId(u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub(crate) fn from_index(index: usize) -> Self {
        ConceptId(index as u32)
    }
}

/// Single-inheritance concept taxonomy with one root.
///
/// Concepts are stored in breadth-first order from the root; siblings keep
/// the order in which they were first declared. This makes the serialized
/// form canonical, so save followed by load reproduces the same ontology.
#[derive(Clone, Debug, PartialEq)]
pub struct Ontology {
    names: Vec<String>,
    lookup: HashMap<String, ConceptId>,
    parent: Vec<Option<ConceptId>>,
    depth: Vec<u32>,
}

impl Ontology {
    /// Builds a taxonomy from `(parent, child)` edges.
    pub fn from_edges<S: AsRef<str>>(root: &str, edges: &[(S, S)]) -> Result<Self, ModelError> {
        if root.is_empty() {
            return Err(ModelError::Ontology("root concept name is empty".into()));
        }
        let mut parent_of: HashMap<&str, &str> = HashMap::new();
        let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
        let mut declared: HashSet<&str> = HashSet::new();
        declared.insert(root);
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            if p.is_empty() || c.is_empty() {
                return Err(ModelError::Ontology("empty concept name in edge".into()));
            }
            if c == root {
                return Err(ModelError::Ontology(format!(
                    "root `{root}` cannot have a parent (edge {p} -> {c})"
                )));
            }
            if p == c {
                return Err(ModelError::Ontology(format!("self-loop on `{c}`")));
            }
            if let Some(prev) = parent_of.insert(c, p) {
                return Err(ModelError::Ontology(format!(
                    "concept `{c}` has more than one parent (`{prev}` and `{p}`)"
                )));
            }
            children.entry(p).or_default().push(c);
            declared.insert(p);
            declared.insert(c);
        }

        let mut names = Vec::with_capacity(declared.len());
        let mut parent = Vec::with_capacity(declared.len());
        let mut depth = Vec::with_capacity(declared.len());
        let mut lookup = HashMap::with_capacity(declared.len());
        let mut queue = VecDeque::from([(root, None::<ConceptId>, 1u32)]);
        while let Some((name, par, d)) = queue.pop_front() {
            let id = ConceptId(names.len() as u32);
            names.push(name.to_string());
            parent.push(par);
            depth.push(d);
            lookup.insert(name.to_string(), id);
            if let Some(kids) = children.get(name) {
                for kid in kids {
                    queue.push_back((kid, Some(id), d + 1));
                }
            }
        }
        if names.len() != declared.len() {
            let mut orphans: Vec<&str> = declared.iter().copied().filter(|n| !lookup.contains_key(*n)).collect();
            orphans.sort_unstable();
            return Err(ModelError::Ontology(format!(
                "concepts not reachable from root `{root}` (cycle or second root): {}",
                orphans.join(", ")
            )));
        }
        Ok(Self {
            names,
            lookup,
            parent,
            depth,
        })
    }

    pub fn root(&self) -> ConceptId {
        ConceptId(0)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        id.index() < self.names.len()
    }

    pub fn name(&self, id: ConceptId) -> &str {
        &self.names[id.index()]
    }

    pub fn get(&self, name: &str) -> Option<ConceptId> {
        self.lookup.get(name).copied()
    }

    /// Resolves a concept name, naming `referenced_by` in the error.
    pub fn resolve(&self, name: &str, referenced_by: &str) -> Result<ConceptId, ModelError> {
        self.get(name).ok_or_else(|| ModelError::UnknownConcept {
            concept: name.to_string(),
            referenced_by: referenced_by.to_string(),
        })
    }

    pub fn parent(&self, id: ConceptId) -> Option<ConceptId> {
        self.parent[id.index()]
    }

    /// Depth with the root at depth 1.
    pub fn depth(&self, id: ConceptId) -> u32 {
        self.depth[id.index()]
    }

    /// The concept itself followed by each ancestor up to the root.
    pub fn ancestors(&self, id: ConceptId) -> impl Iterator<Item = ConceptId> + '_ {
        std::iter::successors(Some(id), move |c| self.parent(*c))
    }

    pub fn ids(&self) -> impl Iterator<Item = ConceptId> {
        (0..self.names.len() as u32).map(ConceptId)
    }

    /// `(parent, child)` edges in canonical order.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.ids()
            .filter_map(|c| {
                self.parent(c)
                    .map(|p| (self.name(p).to_string(), self.name(c).to_string()))
            })
            .collect()
    }
}

/// Non-functional attributes of an atomic service.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Qos {
    #[serde(rename = "a")]
    pub availability: f64,
    #[serde(rename = "r")]
    pub reliability: f64,
    /// Response time in milliseconds.
    #[serde(rename = "t")]
    pub time: f64,
    #[serde(rename = "ct")]
    pub cost: f64,
}

impl Qos {
    fn check(&self) -> Result<(), String> {
        let unit = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        if !unit(self.availability) {
            return Err(format!("availability {} not in (0, 1]", self.availability));
        }
        if !unit(self.reliability) {
            return Err(format!("reliability {} not in (0, 1]", self.reliability));
        }
        if !(self.time.is_finite() && self.time > 0.0) {
            return Err(format!("response time {} must be > 0", self.time));
        }
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return Err(format!("cost {} must be >= 0", self.cost));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Service {
    pub id: String,
    pub inputs: Vec<ConceptId>,
    pub outputs: Vec<ConceptId>,
    pub qos: Qos,
}

/// Ontology plus services. The position of a service in `services` is its
/// permutation symbol and never changes.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceRepository {
    ontology: Ontology,
    services: Vec<Service>,
}

impl ServiceRepository {
    pub fn new(ontology: Ontology, services: Vec<Service>) -> Result<Self, ModelError> {
        let mut ids = HashSet::new();
        for s in &services {
            if s.id.is_empty() {
                return Err(ModelError::Service {
                    service: String::new(),
                    message: "empty id".into(),
                });
            }
            if !ids.insert(s.id.as_str()) {
                return Err(ModelError::Service {
                    service: s.id.clone(),
                    message: "duplicate service id".into(),
                });
            }
            for (which, set) in [("inputs", &s.inputs), ("outputs", &s.outputs)] {
                if set.is_empty() {
                    return Err(ModelError::Service {
                        service: s.id.clone(),
                        message: format!("{which} are empty"),
                    });
                }
                let mut seen = HashSet::new();
                for c in set {
                    if !ontology.contains(*c) {
                        return Err(ModelError::Service {
                            service: s.id.clone(),
                            message: format!("{which} reference a concept outside the ontology"),
                        });
                    }
                    if !seen.insert(*c) {
                        return Err(ModelError::Service {
                            service: s.id.clone(),
                            message: format!("duplicate concept `{}` in {which}", ontology.name(*c)),
                        });
                    }
                }
            }
            s.qos.check().map_err(|message| ModelError::Service {
                service: s.id.clone(),
                message,
            })?;
        }
        Ok(Self { ontology, services })
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn services(&self) -> &[Service] {
        &self.services
    }

    pub fn service(&self, index: usize) -> &Service {
        &self.services[index]
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.services.iter().position(|s| s.id == id)
    }
}

/// Half-open QoSM preference segment `(lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QosmInterval {
    lo: f64,
    hi: f64,
}

impl QosmInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ModelError> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(ModelError::Task(format!(
                "QoSM segment ({lo}, {hi}] must satisfy 0 <= lo < hi <= 1"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, qosm: f64) -> bool {
        qosm > self.lo && qosm <= self.hi
    }
}

impl fmt::Display for QosmInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}]", self.lo, self.hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositionTask {
    pub inputs: Vec<ConceptId>,
    pub outputs: Vec<ConceptId>,
    pub cons: QosmInterval,
}

/// K composition tasks sharing inputs and outputs, ordered by segment.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSet {
    tasks: Vec<CompositionTask>,
}

impl TaskSet {
    /// Builds a task set; segments are sorted ascending by lower bound.
    pub fn new(
        inputs: Vec<ConceptId>,
        outputs: Vec<ConceptId>,
        segments: Vec<QosmInterval>,
    ) -> Result<Self, ModelError> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(ModelError::Task("task inputs and outputs must be non-empty".into()));
        }
        if segments.is_empty() {
            return Err(ModelError::Task("at least one QoSM segment is required".into()));
        }
        let mut segments = segments;
        segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let tasks = segments
            .into_iter()
            .map(|cons| CompositionTask {
                inputs: inputs.clone(),
                outputs: outputs.clone(),
                cons,
            })
            .collect();
        Ok(Self { tasks })
    }

    /// Evenly partitions (0, 1] into `k` segments.
    pub fn even_segments(inputs: Vec<ConceptId>, outputs: Vec<ConceptId>, k: usize) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::Parameter("K must be >= 1".into()));
        }
        let segments = (0..k)
            .map(|j| QosmInterval::new(j as f64 / k as f64, (j + 1) as f64 / k as f64))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(inputs, outputs, segments)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, j: usize) -> &CompositionTask {
        &self.tasks[j]
    }

    pub fn tasks(&self) -> &[CompositionTask] {
        &self.tasks
    }

    pub fn inputs(&self) -> &[ConceptId] {
        &self.tasks[0].inputs
    }

    pub fn outputs(&self) -> &[ConceptId] {
        &self.tasks[0].outputs
    }

    /// True when segment `j` ends exactly where segment `j + 1` starts.
    pub fn contiguous_with_next(&self, j: usize) -> bool {
        self.tasks
            .get(j + 1)
            .is_some_and(|next| self.tasks[j].cons.hi == next.cons.lo)
    }

    /// A single-task set holding only task `j`.
    pub fn single(&self, j: usize) -> TaskSet {
        TaskSet {
            tasks: vec![self.tasks[j].clone()],
        }
    }
}

/// Iterated forward closure: true iff repeatedly firing every service whose
/// inputs are all matched (exactly or by a more specific concept) eventually
/// matches all task outputs.
pub fn validate_task(repo: &ServiceRepository, task: &CompositionTask) -> bool {
    let ont = repo.ontology();
    // covered[c]: some available concept is c or a descendant of c
    let mut covered = vec![false; ont.len()];
    let cover = |c: ConceptId, covered: &mut Vec<bool>| {
        for a in ont.ancestors(c) {
            if covered[a.index()] {
                break;
            }
            covered[a.index()] = true;
        }
    };
    for &c in &task.inputs {
        cover(c, &mut covered);
    }
    let mut fired = vec![false; repo.len()];
    loop {
        if task.outputs.iter().all(|o| covered[o.index()]) {
            return true;
        }
        let mut progress = false;
        for (i, s) in repo.services().iter().enumerate() {
            if !fired[i] && s.inputs.iter().all(|c| covered[c.index()]) {
                fired[i] = true;
                progress = true;
                for &o in &s.outputs {
                    cover(o, &mut covered);
                }
            }
        }
        if !progress {
            return false;
        }
    }
}

// ---------------------------------------------------------------------------
// JSON file formats

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyFile {
    root: String,
    edges: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServiceFile {
    id: String,
    #[serde(rename = "in")]
    inputs: Vec<String>,
    #[serde(rename = "out")]
    outputs: Vec<String>,
    qos: Qos,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepositoryFile {
    ontology: OntologyFile,
    services: Vec<ServiceFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSetFile {
    inputs: Vec<String>,
    outputs: Vec<String>,
    segments: Vec<(f64, f64)>,
}

fn read(path: &Path) -> Result<String, ModelError> {
    fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), ModelError> {
    fs::write(path, text).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_repository(path: impl AsRef<Path>) -> Result<ServiceRepository, ModelError> {
    let path = path.as_ref();
    parse_repository_named(&read(path)?, &path.display().to_string())
}

pub fn parse_repository(json: &str) -> Result<ServiceRepository, ModelError> {
    parse_repository_named(json, "repository")
}

fn parse_repository_named(json: &str, context: &str) -> Result<ServiceRepository, ModelError> {
    let file: RepositoryFile = serde_json::from_str(json).map_err(|source| ModelError::Parse {
        context: context.to_string(),
        source,
    })?;
    let ontology = Ontology::from_edges(&file.ontology.root, &file.ontology.edges)?;
    let mut services = Vec::with_capacity(file.services.len());
    for s in file.services {
        let who = format!("service `{}`", s.id);
        let resolve = |names: &[String]| {
            names
                .iter()
                .map(|n| ontology.resolve(n, &who))
                .collect::<Result<Vec<_>, _>>()
        };
        services.push(Service {
            inputs: resolve(&s.inputs)?,
            outputs: resolve(&s.outputs)?,
            id: s.id,
            qos: s.qos,
        });
    }
    ServiceRepository::new(ontology, services)
}

pub fn repository_to_json(repo: &ServiceRepository) -> String {
    let ont = repo.ontology();
    let names = |ids: &[ConceptId]| ids.iter().map(|c| ont.name(*c).to_string()).collect();
    let file = RepositoryFile {
        ontology: OntologyFile {
            root: ont.name(ont.root()).to_string(),
            edges: ont.edges(),
        },
        services: repo
            .services()
            .iter()
            .map(|s| ServiceFile {
                id: s.id.clone(),
                inputs: names(&s.inputs),
                outputs: names(&s.outputs),
                qos: s.qos,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("repository serializes")
}

pub fn save_repository(repo: &ServiceRepository, path: impl AsRef<Path>) -> Result<(), ModelError> {
    write(path.as_ref(), &repository_to_json(repo))
}

pub fn load_task_set(path: impl AsRef<Path>, ontology: &Ontology) -> Result<TaskSet, ModelError> {
    let path = path.as_ref();
    parse_task_set_named(&read(path)?, ontology, &path.display().to_string())
}

pub fn parse_task_set(json: &str, ontology: &Ontology) -> Result<TaskSet, ModelError> {
    parse_task_set_named(json, ontology, "task set")
}

fn parse_task_set_named(json: &str, ontology: &Ontology, context: &str) -> Result<TaskSet, ModelError> {
    let file: TaskSetFile = serde_json::from_str(json).map_err(|source| ModelError::Parse {
        context: context.to_string(),
        source,
    })?;
    let resolve = |names: &[String], which: &str| {
        let mut seen = HashSet::new();
        let mut ids = Vec::with_capacity(names.len());
        for n in names {
            let id = ontology.resolve(n, &format!("task {which}"))?;
            if !seen.insert(id) {
                return Err(ModelError::Task(format!("duplicate concept `{n}` in task {which}")));
            }
            ids.push(id);
        }
        Ok(ids)
    };
    let inputs = resolve(&file.inputs, "inputs")?;
    let outputs = resolve(&file.outputs, "outputs")?;
    let segments = file
        .segments
        .iter()
        .map(|&(lo, hi)| QosmInterval::new(lo, hi))
        .collect::<Result<Vec<_>, _>>()?;
    TaskSet::new(inputs, outputs, segments)
}

pub fn task_set_to_json(tasks: &TaskSet, ontology: &Ontology) -> String {
    let names = |ids: &[ConceptId]| ids.iter().map(|c| ontology.name(*c).to_string()).collect();
    let file = TaskSetFile {
        inputs: names(tasks.inputs()),
        outputs: names(tasks.outputs()),
        segments: tasks.tasks().iter().map(|t| (t.cons.lo, t.cons.hi)).collect(),
    };
    serde_json::to_string_pretty(&file).expect("task set serializes")
}

pub fn save_task_set(tasks: &TaskSet, ontology: &Ontology, path: impl AsRef<Path>) -> Result<(), ModelError> {
    write(path.as_ref(), &task_set_to_json(tasks, ontology))
}
