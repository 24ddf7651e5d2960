//! Concept subsumption, link match degrees and taxonomy similarity.

use std::cmp::Ordering;

use serde::Serialize;

use crate::model::{ConceptId, Ontology};

/// Quality of a single data link between a provided and a required concept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MatchDegree {
    Exact,
    Plugin,
    Fail,
}

impl MatchDegree {
    pub fn score(self) -> f64 {
        match self {
            MatchDegree::Exact => 1.0,
            MatchDegree::Plugin => 0.75,
            MatchDegree::Fail => 0.0,
        }
    }

    pub fn is_valid(self) -> bool {
        self != MatchDegree::Fail
    }
}

/// True iff `ancestor` lies on the parent chain of `descendant` (or equals it).
pub fn subsumes(ont: &Ontology, ancestor: ConceptId, descendant: ConceptId) -> bool {
    if ont.depth(ancestor) > ont.depth(descendant) {
        return false;
    }
    ont.ancestors(descendant).any(|c| c == ancestor)
}

/// Exact when equal, Plugin when `provided` is strictly more specific than
/// `required`, Fail otherwise.
pub fn match_degree(ont: &Ontology, provided: ConceptId, required: ConceptId) -> MatchDegree {
    if provided == required {
        MatchDegree::Exact
    } else if subsumes(ont, required, provided) {
        MatchDegree::Plugin
    } else {
        MatchDegree::Fail
    }
}

pub fn lowest_common_ancestor(ont: &Ontology, a: ConceptId, b: ConceptId) -> ConceptId {
    let (mut a, mut b) = (a, b);
    while ont.depth(a) > ont.depth(b) {
        a = ont.parent(a).expect("non-root has parent");
    }
    while ont.depth(b) > ont.depth(a) {
        b = ont.parent(b).expect("non-root has parent");
    }
    while a != b {
        a = ont.parent(a).expect("single root");
        b = ont.parent(b).expect("single root");
    }
    a
}

/// `2 * depth(lca) / (depth(a) + depth(b))`, root at depth 1.
pub fn similarity(ont: &Ontology, a: ConceptId, b: ConceptId) -> f64 {
    if a == b {
        return 1.0;
    }
    let lca = lowest_common_ancestor(ont, a, b);
    2.0 * ont.depth(lca) as f64 / (ont.depth(a) + ont.depth(b)) as f64
}

/// Where a concept comes from inside a composition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Source {
    /// The task inputs.
    Start,
    Service(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceMatch {
    pub source: Source,
    pub provided: ConceptId,
    pub degree: MatchDegree,
    pub similarity: f64,
}

impl SourceMatch {
    /// Preference order: higher degree score, then higher similarity, then
    /// `Start` before services and lower service index, then lower concept id.
    pub fn preference(&self, other: &SourceMatch) -> Ordering {
        other
            .degree
            .score()
            .total_cmp(&self.degree.score())
            .then(other.similarity.total_cmp(&self.similarity))
            .then(self.source.cmp(&other.source))
            .then(self.provided.cmp(&other.provided))
    }

    pub fn is_better_than(&self, other: &SourceMatch) -> bool {
        self.preference(other) == Ordering::Less
    }
}

/// Best non-failing provider of `required` among `available`, or `None`.
pub fn best_source(ont: &Ontology, available: &[(Source, ConceptId)], required: ConceptId) -> Option<SourceMatch> {
    available
        .iter()
        .filter_map(|&(source, provided)| {
            let degree = match_degree(ont, provided, required);
            degree.is_valid().then(|| SourceMatch {
                source,
                provided,
                degree,
                similarity: similarity(ont, provided, required),
            })
        })
        .min_by(|a, b| a.preference(b))
}

/// Incrementally maintained `best_source` for every concept in the ontology.
///
/// Offering `(source, c)` can only improve the entries of `c` and its
/// ancestors, so each offer walks one parent chain instead of rescanning the
/// whole available set.
#[derive(Clone, Debug)]
pub struct ProviderTable<'a> {
    ont: &'a Ontology,
    best: Vec<Option<SourceMatch>>,
}

impl<'a> ProviderTable<'a> {
    pub fn new(ont: &'a Ontology) -> Self {
        Self {
            ont,
            best: vec![None; ont.len()],
        }
    }

    pub fn offer(&mut self, source: Source, provided: ConceptId) {
        let dp = self.ont.depth(provided) as f64;
        for required in self.ont.ancestors(provided) {
            let degree = if required == provided {
                MatchDegree::Exact
            } else {
                MatchDegree::Plugin
            };
            // lca(provided, ancestor) is the ancestor itself
            let dr = self.ont.depth(required) as f64;
            let candidate = SourceMatch {
                source,
                provided,
                degree,
                similarity: if degree == MatchDegree::Exact {
                    1.0
                } else {
                    2.0 * dr / (dp + dr)
                },
            };
            let slot = &mut self.best[required.index()];
            match slot {
                Some(current) if !candidate.is_better_than(current) => {}
                _ => *slot = Some(candidate),
            }
        }
    }

    pub fn best(&self, required: ConceptId) -> Option<&SourceMatch> {
        self.best[required.index()].as_ref()
    }

    pub fn is_fulfilled(&self, required: ConceptId) -> bool {
        self.best[required.index()].is_some()
    }
}
