//! Fixed-length single-task GA: tournament selection, elitism, two-point
//! crossover and swap mutation over the same permutation encoding.

use rand::Rng;

use super::{
    check_solvable, stream_rng, swap_mutation, two_point_crossover, AlgorithmConfig, Archive, EngineError, RunOutcome,
};
use crate::decode::Permutation;
use crate::exec;
use crate::model::{CompositionTask, ServiceRepository, TaskSet};
use crate::quality::Evaluator;

#[derive(Clone, Debug)]
struct Member {
    permutation: Permutation,
    fitness: Option<f64>,
}

fn tournament<R: Rng + ?Sized>(pop: &[Member], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if pop[c].fitness > pop[best].fitness {
            best = c;
        }
    }
    best
}

fn evaluate(pop: &mut [Member], evaluator: &Evaluator<'_>) -> Result<usize, EngineError> {
    let pending: Vec<(usize, &Permutation)> = pop
        .iter()
        .enumerate()
        .filter(|(_, m)| m.fitness.is_none())
        .map(|(i, m)| (i, &m.permutation))
        .collect();
    let scored = exec::map(&pending, |(_, p)| evaluator.assess(p).map(|a| evaluator.fitness(&a, 0)));
    let count = pending.len();
    let slots: Vec<usize> = pending.iter().map(|(i, _)| *i).collect();
    for (i, f) in slots.into_iter().zip(scored) {
        pop[i].fitness = Some(f?);
    }
    Ok(count)
}

/// Optimises a single task. The returned outcome has one task slot.
///
/// Elites are copied unchanged; children identical to their parent keep the
/// parent's fitness instead of being decoded again.
pub fn run_baseline(
    repo: &ServiceRepository,
    task: &CompositionTask,
    config: &AlgorithmConfig,
) -> Result<RunOutcome, EngineError> {
    config.validate()?;
    let tasks = TaskSet::new(task.inputs.clone(), task.outputs.clone(), vec![task.cons])
        .map_err(|e| EngineError::Config(e.to_string()))?;
    check_solvable(repo, &tasks)?;
    let evaluator = Evaluator::new(repo, &tasks, config.weights, config.literal_time_cost);
    let params = config.baseline;
    let m = config.population;
    let n = repo.len();

    let mut init_rng = stream_rng(config.seed, 0, 0);
    let mut pop: Vec<Member> = (0..m)
        .map(|_| Member {
            permutation: Permutation::random(n, &mut init_rng),
            fitness: None,
        })
        .collect();
    let mut decodes = evaluate(&mut pop, &evaluator)?;
    let mut archive = Archive::new(1);
    for mem in &pop {
        archive.offer(0, &mem.permutation, mem.fitness.expect("evaluated"));
    }
    let mut trace = Vec::with_capacity(config.generations + 1);
    trace.push(archive.snapshot());

    for g in 1..=config.generations {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| pop[b].fitness.unwrap().total_cmp(&pop[a].fitness.unwrap()));
        let mut next: Vec<Member> = order.iter().take(params.elitism).map(|&i| pop[i].clone()).collect();
        let mut pairing = 0;
        while next.len() < m {
            let mut rng = stream_rng(config.seed, g, pairing);
            pairing += 1;
            let a = tournament(&pop, params.tournament_size, &mut rng);
            let b = tournament(&pop, params.tournament_size, &mut rng);
            let mut kids = if rng.random::<f64>() < params.crossover_rate {
                let (c1, c2) = two_point_crossover(&pop[a].permutation, &pop[b].permutation, &mut rng);
                [
                    Member {
                        permutation: c1,
                        fitness: None,
                    },
                    Member {
                        permutation: c2,
                        fitness: None,
                    },
                ]
            } else {
                [pop[a].clone(), pop[b].clone()]
            };
            for kid in kids.iter_mut() {
                if rng.random::<f64>() < params.mutation_rate {
                    kid.permutation = swap_mutation(&kid.permutation, &mut rng);
                    kid.fitness = None;
                }
                // crossover can reproduce a parent exactly
                if kid.fitness.is_none() {
                    if kid.permutation == pop[a].permutation {
                        kid.fitness = pop[a].fitness;
                    } else if kid.permutation == pop[b].permutation {
                        kid.fitness = pop[b].fitness;
                    }
                }
            }
            for kid in kids {
                if next.len() < m {
                    next.push(kid);
                }
            }
        }
        decodes += evaluate(&mut next, &evaluator)?;
        for mem in &next {
            archive.offer(0, &mem.permutation, mem.fitness.expect("evaluated"));
        }
        pop = next;
        trace.push(archive.snapshot());
    }

    Ok(RunOutcome {
        best: archive.finish(&evaluator)?,
        trace,
        decodes,
    })
}
