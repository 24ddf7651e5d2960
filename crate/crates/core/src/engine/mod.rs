//! The permutation-based multifactorial evolutionary algorithm and the
//! single-task GA baseline.
//!
//! One population of service permutations serves all K tasks. Each
//! generation breeds `m` children by assortative mating, evaluates each
//! child on the tasks chosen by the [`Strategy`], ranks the union of parents
//! and children per task and keeps the `m` individuals with the highest
//! scalar fitness. A K-slot archive remembers the best permutation ever
//! evaluated on each task.
//!
//! Randomness comes from one master seed. Every pairing of every
//! generation draws from its own ChaCha stream, so evaluation order and
//! thread count cannot change a run.

mod baseline;
pub mod operators;
pub mod population;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::{DecodeError, Permutation};
use crate::model::{validate_task, ServiceRepository, TaskSet};
use crate::quality::{Assessment, Evaluator, Weights, WeightsError};

pub use baseline::run_baseline;
pub use operators::{
    assign_eval_tasks, assortative_mating, mate_pair, neighbors, swap_at, swap_mutation, two_point_crossover,
    two_point_crossover_at, Child, Lineage,
};
pub use population::{evaluate_batch, full_evaluate, initialize, survive, update_ranks, Individual, Scores};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("task {task} (segment {segment}) is not solvable with this repository")]
    Unsolvable { task: usize, segment: String },
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Which tasks a child is evaluated on besides the one it inherits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Inherited task only.
    Vertical,
    /// Inherited task and its adjacent segments.
    NeighborTasks,
    /// Every task.
    AllTasks,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Vertical => "pmfea",
            Strategy::NeighborTasks => "pmfea-nt",
            Strategy::AllTasks => "pmfea-at",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub elitism: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            crossover_rate: 0.95,
            mutation_rate: 0.05,
            tournament_size: 2,
            elitism: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    /// Population size `m`; must be even.
    pub population: usize,
    pub generations: usize,
    /// Random mating probability.
    pub rmp: f64,
    pub weights: Weights,
    /// Apply `(1 - x)` to the already inverted time and cost terms of the
    /// comprehensive quality.
    pub literal_time_cost: bool,
    pub strategy: Strategy,
    pub seed: u64,
    pub baseline: BaselineParams,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 200,
            rmp: 0.3,
            weights: Weights::default(),
            literal_time_cost: true,
            strategy: Strategy::NeighborTasks,
            seed: 0,
            baseline: BaselineParams::default(),
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(EngineError::Config(format!(
                "population {} must be even and >= 2",
                self.population
            )));
        }
        if self.generations >= u32::MAX as usize {
            return Err(EngineError::Config("too many generations".into()));
        }
        if !(0.0..=1.0).contains(&self.rmp) {
            return Err(EngineError::Config(format!("rmp {} not in [0, 1]", self.rmp)));
        }
        let b = &self.baseline;
        if !(0.0..=1.0).contains(&b.crossover_rate) || !(0.0..=1.0).contains(&b.mutation_rate) {
            return Err(EngineError::Config("baseline rates must lie in [0, 1]".into()));
        }
        if b.tournament_size == 0 {
            return Err(EngineError::Config("tournament size must be >= 1".into()));
        }
        if b.elitism > self.population {
            return Err(EngineError::Config(format!(
                "elitism {} exceeds population {}",
                b.elitism, self.population
            )));
        }
        self.weights.validate()?;
        Ok(())
    }
}

/// Independent random stream for `(generation, lane)` under `seed`.
pub fn stream_rng(seed: u64, generation: usize, lane: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | lane as u64);
    rng
}

/// Best solution found for one task, with its full quality breakdown.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBest {
    pub task: usize,
    pub permutation: Permutation,
    pub fitness: f64,
    pub assessment: Assessment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub best: Vec<TaskBest>,
    /// `trace[g][j]`: best fitness on task `j` seen up to generation `g`
    /// (generation 0 is the initial population).
    pub trace: Vec<Vec<f64>>,
    /// Number of permutation decodes performed.
    pub decodes: usize,
}

/// Best-ever permutation per task, kept outside the population.
#[derive(Clone, Debug)]
pub(crate) struct Archive {
    slots: Vec<Option<(Permutation, f64)>>,
}

impl Archive {
    pub(crate) fn new(k: usize) -> Self {
        Self { slots: vec![None; k] }
    }

    pub(crate) fn offer(&mut self, task: usize, permutation: &Permutation, fitness: f64) {
        match &self.slots[task] {
            Some((_, best)) if *best >= fitness => {}
            _ => self.slots[task] = Some((permutation.clone(), fitness)),
        }
    }

    pub(crate) fn offer_individual(&mut self, ind: &Individual) {
        for (j, c) in ind.costs.evaluated() {
            self.offer(j, &ind.permutation, c);
        }
    }

    pub(crate) fn snapshot(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| s.as_ref().map_or(f64::NEG_INFINITY, |(_, f)| *f))
            .collect()
    }

    pub(crate) fn finish(self, evaluator: &Evaluator<'_>) -> Result<Vec<TaskBest>, EngineError> {
        self.slots
            .into_iter()
            .enumerate()
            .map(|(task, slot)| {
                let (permutation, fitness) = slot.expect("every task evaluated in generation 0");
                let assessment = evaluator.assess(&permutation)?;
                Ok(TaskBest {
                    task,
                    permutation,
                    fitness,
                    assessment,
                })
            })
            .collect()
    }
}

pub(crate) fn check_solvable(repo: &ServiceRepository, tasks: &TaskSet) -> Result<(), EngineError> {
    for (j, t) in tasks.tasks().iter().enumerate() {
        if !validate_task(repo, t) {
            return Err(EngineError::Unsolvable {
                task: j,
                segment: t.cons.to_string(),
            });
        }
    }
    Ok(())
}

/// A configured multitask run over one repository and task set.
pub struct Pmfea<'a> {
    evaluator: Evaluator<'a>,
    config: AlgorithmConfig,
}

impl<'a> Pmfea<'a> {
    pub fn new(repo: &'a ServiceRepository, tasks: &'a TaskSet, config: AlgorithmConfig) -> Result<Self, EngineError> {
        config.validate()?;
        check_solvable(repo, tasks)?;
        Ok(Self {
            evaluator: Evaluator::new(repo, tasks, config.weights, config.literal_time_cost),
            config,
        })
    }

    pub fn evaluator(&self) -> &Evaluator<'a> {
        &self.evaluator
    }

    pub fn run(&self) -> Result<RunOutcome, EngineError> {
        self.run_observed(|_, _| {})
    }

    /// Runs to completion, calling `observer(generation, population)` after
    /// the initial evaluation and after each generation's survival.
    pub fn run_observed(&self, mut observer: impl FnMut(usize, &[Individual])) -> Result<RunOutcome, EngineError> {
        let cfg = &self.config;
        let k = self.evaluator.tasks.len();
        let n = self.evaluator.repo.len();
        let m = cfg.population;

        let mut init_rng = stream_rng(cfg.seed, 0, 0);
        let mut population = initialize(n, k, m, &mut init_rng);
        let all: Vec<usize> = (0..k).collect();
        let mut decodes = evaluate_batch(&mut population, &vec![all; m], &self.evaluator)?;
        update_ranks(&mut population);

        let mut archive = Archive::new(k);
        population.iter().for_each(|ind| archive.offer_individual(ind));
        let mut trace = Vec::with_capacity(cfg.generations + 1);
        trace.push(archive.snapshot());
        observer(0, &population);

        for g in 1..=cfg.generations {
            let mut children = Vec::with_capacity(m);
            let mut eval_sets = Vec::with_capacity(m);
            for pairing in 0..m / 2 {
                let mut rng = stream_rng(cfg.seed, g, pairing);
                for child in mate_pair(&population, cfg.rmp, &mut rng) {
                    let (inherited, set) = assign_eval_tasks(child.lineage, cfg.strategy, k, &mut rng);
                    let mut ind = Individual::new(child.permutation, k);
                    ind.skill = inherited;
                    children.push(ind);
                    eval_sets.push(set);
                }
            }
            decodes += evaluate_batch(&mut children, &eval_sets, &self.evaluator)?;
            children.iter().for_each(|ind| archive.offer_individual(ind));

            let mut union = population;
            union.extend(children);
            update_ranks(&mut union);
            population = survive(union, m);
            update_ranks(&mut population);

            trace.push(archive.snapshot());
            observer(g, &population);
        }

        Ok(RunOutcome {
            best: archive.finish(&self.evaluator)?,
            trace,
            decodes,
        })
    }
}

/// Runs the multitask algorithm with `config.strategy`.
pub fn run(repo: &ServiceRepository, tasks: &TaskSet, config: &AlgorithmConfig) -> Result<RunOutcome, EngineError> {
    Pmfea::new(repo, tasks, *config)?.run()
}
