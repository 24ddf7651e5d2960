//! Permutation to DAG decoding by forward graph building, plus redundant
//! service pruning and an independent structural checker.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CompositionTask, ConceptId, ServiceRepository};
use crate::semantics::{match_degree, similarity, MatchDegree, ProviderTable, Source};

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("task outputs unreachable; unmatched: {missing:?}")]
    Unreachable { missing: Vec<String> },
    #[error("permutation of length {got} does not cover {expected} services")]
    Length { got: usize, expected: usize },
}

/// An ordering of every service index, each exactly once.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    /// Validates the bijection; returns `None` otherwise.
    pub fn new(order: Vec<usize>) -> Option<Self> {
        Self::is_bijection(&order).then_some(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self(order)
    }

    pub fn is_bijection(order: &[usize]) -> bool {
        let mut seen = vec![false; order.len()];
        order
            .iter()
            .all(|&v| v < seen.len() && !std::mem::replace(&mut seen[v], true))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Only for operators that preserve the bijection.
    pub(crate) fn from_vec_unchecked(order: Vec<usize>) -> Self {
        debug_assert!(Self::is_bijection(&order));
        Self(order)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Node {
    Start,
    Service(usize),
    End,
}

impl From<Source> for Node {
    fn from(s: Source) -> Self {
        match s {
            Source::Start => Node::Start,
            Source::Service(i) => Node::Service(i),
        }
    }
}

/// A data link: `provided` (an output of `from`, or a task input) fulfils
/// the `required` input concept of `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub from: Node,
    pub to: Node,
    pub required: ConceptId,
    pub provided: ConceptId,
    pub degree: MatchDegree,
    pub similarity: f64,
}

/// Executable workflow. `services` is in admission order, which is a
/// topological order; Start precedes it and End follows it.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CompositionDag {
    pub services: Vec<usize>,
    pub edges: Vec<Edge>,
}

impl CompositionDag {
    pub fn contains_service(&self, index: usize) -> bool {
        self.services.contains(&index)
    }

    pub fn incoming(&self, node: Node) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == node)
    }

    /// Nodes in cached topological order.
    pub fn topological_order(&self) -> Vec<Node> {
        std::iter::once(Node::Start)
            .chain(self.services.iter().map(|&s| Node::Service(s)))
            .chain(std::iter::once(Node::End))
            .collect()
    }

    /// Set of `(from, to, required concept)` triples, for order-insensitive
    /// comparisons.
    pub fn edge_set(&self) -> HashSet<(Node, Node, ConceptId)> {
        self.edges.iter().map(|e| (e.from, e.to, e.required)).collect()
    }
}

/// Forward graph building without pruning.
///
/// Sweeps the not-yet-admitted services left to right, admitting each one
/// whose inputs are all fulfilled by the task inputs or outputs of already
/// admitted services (including those admitted earlier in the same sweep).
/// Input links are fixed at admission. Stops the moment the task outputs
/// are fulfilled, possibly mid-sweep.
pub fn forward_build(
    repo: &ServiceRepository,
    task: &CompositionTask,
    permutation: &Permutation,
) -> Result<CompositionDag, DecodeError> {
    if permutation.len() != repo.len() {
        return Err(DecodeError::Length {
            got: permutation.len(),
            expected: repo.len(),
        });
    }
    let ont = repo.ontology();
    let mut table = ProviderTable::new(ont);
    for &c in &task.inputs {
        table.offer(Source::Start, c);
    }
    let end_ready = |t: &ProviderTable| task.outputs.iter().all(|&o| t.is_fulfilled(o));

    let mut dag = CompositionDag::default();
    let mut remaining: Vec<usize> = permutation.as_slice().to_vec();
    let mut done = end_ready(&table);
    while !done {
        let admitted_before = dag.services.len();
        let mut deferred = Vec::with_capacity(remaining.len());
        for &s in &remaining {
            if done {
                deferred.push(s);
                continue;
            }
            let service = repo.service(s);
            if !service.inputs.iter().all(|&c| table.is_fulfilled(c)) {
                deferred.push(s);
                continue;
            }
            for &required in &service.inputs {
                let m = table.best(required).expect("checked above");
                dag.edges.push(Edge {
                    from: m.source.into(),
                    to: Node::Service(s),
                    required,
                    provided: m.provided,
                    degree: m.degree,
                    similarity: m.similarity,
                });
            }
            dag.services.push(s);
            for &o in &service.outputs {
                table.offer(Source::Service(s), o);
            }
            done = end_ready(&table);
        }
        remaining = deferred;
        if !done && dag.services.len() == admitted_before {
            let missing = task
                .outputs
                .iter()
                .filter(|&&o| !table.is_fulfilled(o))
                .map(|&o| ont.name(o).to_string())
                .collect();
            return Err(DecodeError::Unreachable { missing });
        }
    }
    for &required in &task.outputs {
        let m = table.best(required).expect("end is ready");
        dag.edges.push(Edge {
            from: m.source.into(),
            to: Node::End,
            required,
            provided: m.provided,
            degree: m.degree,
            similarity: m.similarity,
        });
    }
    Ok(dag)
}

/// Forward graph building followed by [`prune`].
pub fn decode(
    repo: &ServiceRepository,
    task: &CompositionTask,
    permutation: &Permutation,
) -> Result<CompositionDag, DecodeError> {
    forward_build(repo, task, permutation).map(prune)
}

/// Repeatedly removes service nodes that feed nothing, until fixpoint.
pub fn prune(mut dag: CompositionDag) -> CompositionDag {
    let mut out_degree: HashMap<usize, usize> = dag.services.iter().map(|&s| (s, 0)).collect();
    for e in &dag.edges {
        if let Node::Service(s) = e.from {
            *out_degree.entry(s).or_default() += 1;
        }
    }
    let mut removed: HashSet<usize> = HashSet::new();
    let mut queue: VecDeque<usize> = dag.services.iter().copied().filter(|s| out_degree[s] == 0).collect();
    while let Some(s) = queue.pop_front() {
        if !removed.insert(s) {
            continue;
        }
        for e in dag.edges.iter().filter(|e| e.to == Node::Service(s)) {
            if let Node::Service(p) = e.from {
                let d = out_degree.get_mut(&p).expect("known node");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(p);
                }
            }
        }
    }
    if removed.is_empty() {
        return dag;
    }
    dag.services.retain(|s| !removed.contains(s));
    dag.edges.retain(|e| match e.to {
        Node::Service(s) => !removed.contains(&s),
        _ => true,
    });
    dag
}

/// A broken DAG invariant, as reported by [`check_dag`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    UnknownService(usize),
    DuplicateNode(Node),
    DanglingEdge {
        from: Node,
        to: Node,
    },
    MissingInput {
        node: Node,
        concept: String,
    },
    DuplicateInput {
        node: Node,
        concept: String,
    },
    UnexpectedInput {
        node: Node,
        concept: String,
    },
    NotProvided {
        from: Node,
        concept: String,
    },
    BadMatch {
        from: Node,
        to: Node,
        concept: String,
        reason: String,
    },
    Cycle,
    NotOnPath(Node),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownService(s) => write!(f, "unknown service index {s}"),
            Violation::DuplicateNode(n) => write!(f, "node {n:?} listed twice"),
            Violation::DanglingEdge { from, to } => write!(f, "edge {from:?} -> {to:?} references a missing node"),
            Violation::MissingInput { node, concept } => write!(f, "{node:?}: input `{concept}` not matched"),
            Violation::DuplicateInput { node, concept } => {
                write!(f, "{node:?}: input `{concept}` matched more than once")
            }
            Violation::UnexpectedInput { node, concept } => write!(f, "{node:?}: edge for non-input `{concept}`"),
            Violation::NotProvided { from, concept } => write!(f, "{from:?} does not provide `{concept}`"),
            Violation::BadMatch {
                from,
                to,
                concept,
                reason,
            } => {
                write!(f, "edge {from:?} -> {to:?} on `{concept}`: {reason}")
            }
            Violation::Cycle => write!(f, "graph contains a cycle"),
            Violation::NotOnPath(n) => write!(f, "{n:?} is not on any Start -> End path"),
        }
    }
}

/// Checks every DAG invariant from scratch against `repo` and `task`.
///
/// Does not trust the cached topological order: acyclicity and path
/// membership are recomputed from the edge list.
pub fn check_dag(repo: &ServiceRepository, task: &CompositionTask, dag: &CompositionDag) -> Vec<Violation> {
    let ont = repo.ontology();
    let mut out = Vec::new();
    let mut nodes: HashSet<Node> = HashSet::from([Node::Start, Node::End]);
    for &s in &dag.services {
        if s >= repo.len() {
            out.push(Violation::UnknownService(s));
        }
        if !nodes.insert(Node::Service(s)) {
            out.push(Violation::DuplicateNode(Node::Service(s)));
        }
    }
    for e in &dag.edges {
        if !nodes.contains(&e.from) || !nodes.contains(&e.to) || e.from == Node::End || e.to == Node::Start {
            out.push(Violation::DanglingEdge { from: e.from, to: e.to });
        }
    }
    if !out.is_empty() {
        return out;
    }

    // input satisfaction
    let required_of = |n: Node| -> &[ConceptId] {
        match n {
            Node::Service(s) => &repo.service(s).inputs,
            Node::End => &task.outputs,
            Node::Start => &[],
        }
    };
    let provided_by = |n: Node| -> &[ConceptId] {
        match n {
            Node::Service(s) => &repo.service(s).outputs,
            Node::Start => &task.inputs,
            Node::End => &[],
        }
    };
    for &node in nodes.iter().filter(|n| **n != Node::Start) {
        let incoming: Vec<&Edge> = dag.incoming(node).collect();
        for &c in required_of(node) {
            match incoming.iter().filter(|e| e.required == c).count() {
                0 => out.push(Violation::MissingInput {
                    node,
                    concept: ont.name(c).into(),
                }),
                1 => {}
                _ => out.push(Violation::DuplicateInput {
                    node,
                    concept: ont.name(c).into(),
                }),
            }
        }
        for e in &incoming {
            let concept = ont.name(e.required).to_string();
            if !required_of(node).contains(&e.required) {
                out.push(Violation::UnexpectedInput {
                    node,
                    concept: concept.clone(),
                });
            }
            if !provided_by(e.from).contains(&e.provided) {
                out.push(Violation::NotProvided {
                    from: e.from,
                    concept: ont.name(e.provided).into(),
                });
            }
            let degree = match_degree(ont, e.provided, e.required);
            let reason = if !degree.is_valid() || !e.degree.is_valid() {
                Some("failing match".to_string())
            } else if degree != e.degree {
                Some(format!("recorded {:?}, actual {degree:?}", e.degree))
            } else if (similarity(ont, e.provided, e.required) - e.similarity).abs() > 1e-12 {
                Some("similarity mismatch".to_string())
            } else {
                None
            };
            if let Some(reason) = reason {
                out.push(Violation::BadMatch {
                    from: e.from,
                    to: e.to,
                    concept,
                    reason,
                });
            }
        }
    }

    // acyclicity (Kahn)
    let mut indeg: HashMap<Node, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    let mut succ: HashMap<Node, Vec<Node>> = HashMap::new();
    let mut pred: HashMap<Node, Vec<Node>> = HashMap::new();
    for e in &dag.edges {
        *indeg.get_mut(&e.to).expect("known") += 1;
        succ.entry(e.from).or_default().push(e.to);
        pred.entry(e.to).or_default().push(e.from);
    }
    let mut queue: VecDeque<Node> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut visited = 0;
    while let Some(n) = queue.pop_front() {
        visited += 1;
        for m in succ.get(&n).into_iter().flatten() {
            let d = indeg.get_mut(m).expect("known");
            *d -= 1;
            if *d == 0 {
                queue.push_back(*m);
            }
        }
    }
    if visited != nodes.len() {
        out.push(Violation::Cycle);
    }

    // every service on some Start -> End path
    let reach = |from: Node, adj: &HashMap<Node, Vec<Node>>| {
        let mut seen = HashSet::from([from]);
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            for m in adj.get(&n).into_iter().flatten() {
                if seen.insert(*m) {
                    stack.push(*m);
                }
            }
        }
        seen
    };
    let forward = reach(Node::Start, &succ);
    let backward = reach(Node::End, &pred);
    for &s in &dag.services {
        let n = Node::Service(s);
        if !(forward.contains(&n) && backward.contains(&n)) {
            out.push(Violation::NotOnPath(n));
        }
    }
    out
}

fn node_label(repo: &ServiceRepository, n: Node) -> String {
    match n {
        Node::Start => "Start".into(),
        Node::End => "End".into(),
        Node::Service(s) => repo.service(s).id.clone(),
    }
}

impl CompositionDag {
    /// Plain-text adjacency listing: one line per node, then one per edge.
    pub fn to_adjacency_text(&self, repo: &ServiceRepository) -> String {
        let ont = repo.ontology();
        let mut s = String::new();
        for n in self.topological_order() {
            let _ = writeln!(s, "node {}", node_label(repo, n));
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "edge {} -> {} {} <- {} {:?} {:.6}",
                node_label(repo, e.from),
                node_label(repo, e.to),
                ont.name(e.required),
                ont.name(e.provided),
                e.degree,
                e.similarity
            );
        }
        s
    }

    /// Graphviz DOT rendering with concept and match-degree edge labels.
    pub fn to_dot(&self, repo: &ServiceRepository) -> String {
        let ont = repo.ontology();
        let mut s = String::from("digraph composition {\n  rankdir=LR;\n");
        for n in self.topological_order() {
            let label = node_label(repo, n);
            let shape = if matches!(n, Node::Service(_)) {
                "box"
            } else {
                "ellipse"
            };
            let _ = writeln!(s, "  \"{label}\" [shape={shape}];");
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [label=\"{} ({:?})\"];",
                node_label(repo, e.from),
                node_label(repo, e.to),
                ont.name(e.required),
                e.degree
            );
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Ontology, Qos, QosmInterval, Service};

    // A -> S0 -> B -> S1 -> C -> S2 -> D; End needs B only after pruning tests
    fn chain() -> (ServiceRepository, CompositionTask) {
        let ont = Ontology::from_edges(
            "Thing",
            &[("Thing", "A"), ("Thing", "B"), ("Thing", "C"), ("Thing", "D")],
        )
        .unwrap();
        let c = |n| ont.get(n).unwrap();
        let qos = Qos {
            availability: 0.9,
            reliability: 0.9,
            time: 10.0,
            cost: 1.0,
        };
        let svc = |id: &str, i, o| Service {
            id: id.into(),
            inputs: vec![c(i)],
            outputs: vec![c(o)],
            qos,
        };
        let services = vec![svc("S0", "A", "B"), svc("S1", "B", "C"), svc("S2", "C", "D")];
        let task = CompositionTask {
            inputs: vec![c("A")],
            outputs: vec![c("B")],
            cons: QosmInterval::new(0.0, 1.0).unwrap(),
        };
        (ServiceRepository::new(ont, services).unwrap(), task)
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![2, 0, 1]).is_some());
        assert!(Permutation::new(vec![0, 0, 1]).is_none());
        assert!(Permutation::new(vec![0, 3, 1]).is_none());
    }

    #[test]
    fn prune_chain_removes_tail_in_cascade() {
        let (repo, task) = chain();
        let ont = repo.ontology();
        let c = |n| ont.get(n).unwrap();
        let edge = |from, to, concept| Edge {
            from,
            to,
            required: c(concept),
            provided: c(concept),
            degree: MatchDegree::Exact,
            similarity: 1.0,
        };
        let dag = CompositionDag {
            services: vec![0, 1, 2],
            edges: vec![
                edge(Node::Start, Node::Service(0), "A"),
                edge(Node::Service(0), Node::Service(1), "B"),
                edge(Node::Service(1), Node::Service(2), "C"),
                edge(Node::Service(0), Node::End, "B"),
            ],
        };
        assert!(!check_dag(&repo, &task, &dag).is_empty());
        let pruned = prune(dag);
        assert_eq!(pruned.services, vec![0]);
        assert_eq!(pruned.edges.len(), 2);
        assert!(check_dag(&repo, &task, &pruned).is_empty());
        assert_eq!(prune(pruned.clone()), pruned);
    }

    #[test]
    fn empty_composition_when_outputs_given() {
        let (repo, mut task) = chain();
        task.outputs = task.inputs.clone();
        let dag = decode(&repo, &task, &Permutation::identity(3)).unwrap();
        assert!(dag.services.is_empty());
        assert_eq!(dag.edges.len(), 1);
        assert_eq!((dag.edges[0].from, dag.edges[0].to), (Node::Start, Node::End));
    }

    #[test]
    fn unreachable_reported() {
        let (repo, mut task) = chain();
        task.inputs = vec![repo.ontology().get("D").unwrap()];
        let err = decode(&repo, &task, &Permutation::identity(3)).unwrap_err();
        assert_eq!(
            err,
            DecodeError::Unreachable {
                missing: vec!["B".into()]
            }
        );
        assert!(matches!(
            decode(&repo, &task, &Permutation::identity(2)),
            Err(DecodeError::Length { .. })
        ));
    }

    #[test]
    fn checker_flags_dangling_input_and_cycle() {
        let (repo, mut task) = chain();
        task.outputs = vec![repo.ontology().get("D").unwrap()];
        let dag = decode(&repo, &task, &Permutation::new(vec![2, 1, 0]).unwrap()).unwrap();
        assert_eq!(dag.services, vec![0, 1, 2]);
        assert!(check_dag(&repo, &task, &dag).is_empty());

        let mut dangling = dag.clone();
        dangling.edges.retain(|e| e.to != Node::Service(1));
        let v = check_dag(&repo, &task, &dangling);
        assert!(
            v.contains(&Violation::MissingInput {
                node: Node::Service(1),
                concept: "B".into()
            }),
            "{v:?}"
        );

        let mut cyclic = dag.clone();
        let mut back = cyclic.edges[0];
        back.from = Node::Service(2);
        back.to = Node::Service(0);
        back.required = repo.ontology().get("A").unwrap();
        cyclic.edges.push(back);
        let v = check_dag(&repo, &task, &cyclic);
        assert!(v.contains(&Violation::Cycle), "{v:?}");
    }

    #[test]
    fn exports_mention_every_node() {
        let (repo, mut task) = chain();
        task.outputs = vec![repo.ontology().get("C").unwrap()];
        let dag = decode(&repo, &task, &Permutation::identity(3)).unwrap();
        let text = dag.to_adjacency_text(&repo);
        assert!(text.contains("node S0") && text.contains("edge S1 -> End C <- C Exact"));
        let dot = dag.to_dot(&repo);
        assert!(dot.starts_with("digraph") && dot.contains("\"S0\" -> \"S1\" [label=\"B (Exact)\"]"));
    }
}
