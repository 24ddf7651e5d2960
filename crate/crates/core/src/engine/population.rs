//! Individuals and the multifactorial bookkeeping: factorial ranks, scalar
//! fitness, skill factors and survival.

use rand::Rng;

use crate::decode::{DecodeError, Permutation};
use crate::exec;
use crate::quality::{Evaluator, FactorialCosts};

/// Task-independent scores of a decoded permutation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub comprehensive: f64,
    pub qosm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub permutation: Permutation,
    pub costs: FactorialCosts,
    /// 1-based factorial rank per task.
    pub ranks: Vec<usize>,
    pub scalar_fitness: f64,
    /// 0-based index of the task this individual ranks best on.
    pub skill: usize,
    pub scores: Option<Scores>,
}

impl Individual {
    pub fn new(permutation: Permutation, k: usize) -> Self {
        Self {
            permutation,
            costs: FactorialCosts::unevaluated(k),
            ranks: vec![0; k],
            scalar_fitness: 0.0,
            skill: 0,
            scores: None,
        }
    }

    fn fill_costs(&mut self, evaluator: &Evaluator<'_>, eval_set: &[usize]) {
        let s = self.scores.expect("scored before filling costs");
        for &j in eval_set {
            if !self.costs.is_evaluated(j) {
                let cons = evaluator.tasks.task(j).cons;
                self.costs
                    .set(j, crate::quality::fitness(s.comprehensive, s.qosm, &cons));
            }
        }
    }
}

/// `m` uniformly random permutations of the repository, unevaluated.
pub fn initialize<R: Rng + ?Sized>(n_services: usize, k: usize, m: usize, rng: &mut R) -> Vec<Individual> {
    (0..m)
        .map(|_| Individual::new(Permutation::random(n_services, rng), k))
        .collect()
}

/// Decodes `ind` (once) and sets its factorial cost on every task in
/// `eval_set` not evaluated yet. Existing entries are never changed.
pub fn full_evaluate(ind: &mut Individual, evaluator: &Evaluator<'_>, eval_set: &[usize]) -> Result<(), DecodeError> {
    if ind.scores.is_none() {
        let a = evaluator.assess(&ind.permutation)?;
        ind.scores = Some(Scores {
            comprehensive: a.comprehensive,
            qosm: a.qosm,
        });
    }
    ind.fill_costs(evaluator, eval_set);
    Ok(())
}

/// [`full_evaluate`] over a batch; decoding runs through [`exec::map`].
/// Returns the number of decodes performed.
pub fn evaluate_batch(
    individuals: &mut [Individual],
    eval_sets: &[Vec<usize>],
    evaluator: &Evaluator<'_>,
) -> Result<usize, DecodeError> {
    debug_assert_eq!(individuals.len(), eval_sets.len());
    let pending: Vec<(usize, &Permutation)> = individuals
        .iter()
        .enumerate()
        .filter(|(_, ind)| ind.scores.is_none())
        .map(|(i, ind)| (i, &ind.permutation))
        .collect();
    let scored = exec::map(&pending, |(_, p)| {
        evaluator.assess(p).map(|a| Scores {
            comprehensive: a.comprehensive,
            qosm: a.qosm,
        })
    });
    let decodes = pending.len();
    let slots: Vec<usize> = pending.iter().map(|(i, _)| *i).collect();
    for (i, s) in slots.into_iter().zip(scored) {
        individuals[i].scores = Some(s?);
    }
    for (ind, set) in individuals.iter_mut().zip(eval_sets) {
        ind.fill_costs(evaluator, set);
    }
    Ok(decodes)
}

/// Recomputes factorial ranks, scalar fitness and skill factors.
///
/// Per task, evaluated individuals are ranked by cost descending, ties in
/// population order. Unevaluated individuals share rank `evaluated + 1`.
/// Scalar fitness and skill only consider evaluated tasks; skill ties go to
/// the lowest task index. An individual evaluated on nothing gets scalar
/// fitness 0.
pub fn update_ranks(population: &mut [Individual]) {
    let Some(k) = population.first().map(|i| i.costs.len()) else {
        return;
    };
    for ind in population.iter_mut() {
        ind.ranks.clear();
        ind.ranks.resize(k, 0);
    }
    for j in 0..k {
        let mut order: Vec<(usize, f64)> = population
            .iter()
            .enumerate()
            .filter_map(|(i, ind)| ind.costs.get(j).map(|c| (i, c)))
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
        let unranked = order.len() + 1;
        for ind in population.iter_mut() {
            ind.ranks[j] = unranked;
        }
        for (r, (i, _)) in order.into_iter().enumerate() {
            population[i].ranks[j] = r + 1;
        }
    }
    for ind in population.iter_mut() {
        let best = ind.costs.evaluated().map(|(j, _)| (ind.ranks[j], j)).min();
        match best {
            Some((rank, j)) => {
                ind.scalar_fitness = 1.0 / rank as f64;
                ind.skill = j;
            }
            None => ind.scalar_fitness = 0.0,
        }
    }
}

/// Keeps the `m` individuals with the highest scalar fitness; ties go to
/// the lower skill index, then to the older (earlier) individual. Survivors
/// keep their relative order.
pub fn survive(union: Vec<Individual>, m: usize) -> Vec<Individual> {
    let mut order: Vec<usize> = (0..union.len()).collect();
    order.sort_by(|&a, &b| {
        union[b]
            .scalar_fitness
            .total_cmp(&union[a].scalar_fitness)
            .then(union[a].skill.cmp(&union[b].skill))
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; union.len()];
    for &i in order.iter().take(m) {
        keep[i] = true;
    }
    union
        .into_iter()
        .zip(keep)
        .filter_map(|(ind, k)| k.then_some(ind))
        .collect()
}
