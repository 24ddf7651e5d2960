use mtwsc_core::engine::{run, run_baseline, AlgorithmConfig, EngineError, Pmfea, Strategy};
use mtwsc_core::model::{Ontology, Qos, QosmInterval, Service, ServiceRepository, TaskSet};
use mtwsc_core::synthetic::{generate_synthetic, SyntheticParams};

fn instance() -> (ServiceRepository, TaskSet) {
    generate_synthetic(&SyntheticParams {
        n_services: 60,
        taxonomy_depth: 5,
        branching: 3,
        k: 4,
        seed: 11,
    })
    .unwrap()
}

fn short(strategy: Strategy, seed: u64) -> AlgorithmConfig {
    AlgorithmConfig {
        generations: 25,
        strategy,
        seed,
        ..AlgorithmConfig::default()
    }
}

#[test]
fn runs_are_reproducible() {
    let (repo, tasks) = instance();
    for s in [Strategy::Vertical, Strategy::NeighborTasks, Strategy::AllTasks] {
        let a = run(&repo, &tasks, &short(s, 7)).unwrap();
        let b = run(&repo, &tasks, &short(s, 7)).unwrap();
        assert_eq!(a, b);
    }
    let t = tasks.task(2);
    assert_eq!(
        run_baseline(&repo, t, &short(Strategy::Vertical, 3)).unwrap(),
        run_baseline(&repo, t, &short(Strategy::Vertical, 3)).unwrap()
    );
}

#[test]
fn trace_is_monotone_and_ends_at_the_best() {
    let (repo, tasks) = instance();
    let out = run(&repo, &tasks, &short(Strategy::NeighborTasks, 1)).unwrap();
    assert_eq!(out.trace.len(), 26);
    assert_eq!(out.best.len(), 4);
    for j in 0..4 {
        assert!(out.trace.windows(2).all(|w| w[1][j] >= w[0][j]));
        assert_eq!(out.trace[25][j], out.best[j].fitness);
        let ev = Pmfea::new(&repo, &tasks, short(Strategy::NeighborTasks, 1)).unwrap();
        let again = ev.evaluator().assess(&out.best[j].permutation).unwrap();
        assert_eq!(ev.evaluator().fitness(&again, j), out.best[j].fitness);
    }
    // initial population on every task, then at most one decode per child
    assert!(out.decodes >= 30 && out.decodes <= 30 * 26);
}

#[test]
fn baseline_outcome_has_one_task() {
    let (repo, tasks) = instance();
    let out = run_baseline(&repo, tasks.task(3), &short(Strategy::Vertical, 5)).unwrap();
    assert_eq!(out.best.len(), 1);
    assert_eq!(out.trace.len(), 26);
    assert!(out.trace.windows(2).all(|w| w[1][0] >= w[0][0]));
    assert_eq!(out.trace[25][0], out.best[0].fitness);
}

#[test]
fn observer_sees_every_generation() {
    let (repo, tasks) = instance();
    let engine = Pmfea::new(&repo, &tasks, short(Strategy::AllTasks, 2)).unwrap();
    let mut seen = Vec::new();
    engine
        .run_observed(|g, pop| {
            assert_eq!(pop.len(), 30);
            seen.push(g);
        })
        .unwrap();
    assert_eq!(seen, (0..=25).collect::<Vec<_>>());
}

#[test]
fn invalid_configurations_are_rejected() {
    let (repo, tasks) = instance();
    for cfg in [
        AlgorithmConfig {
            population: 31,
            ..AlgorithmConfig::default()
        },
        AlgorithmConfig {
            population: 0,
            ..AlgorithmConfig::default()
        },
        AlgorithmConfig {
            rmp: 1.5,
            ..AlgorithmConfig::default()
        },
    ] {
        assert!(matches!(run(&repo, &tasks, &cfg), Err(EngineError::Config(_))));
    }
    let mut w = AlgorithmConfig::default();
    w.weights.mt = 0.9;
    assert!(matches!(run(&repo, &tasks, &w), Err(EngineError::Weights(_))));
}

#[test]
fn unsolvable_task_is_reported() {
    let ont = Ontology::from_edges("Thing", &[("Thing", "A"), ("Thing", "B"), ("Thing", "Z")]).unwrap();
    let id = |n: &str| ont.get(n).unwrap();
    let qos = Qos {
        availability: 0.9,
        reliability: 0.9,
        time: 10.0,
        cost: 1.0,
    };
    let services = vec![
        Service {
            id: "S1".into(),
            inputs: vec![id("A")],
            outputs: vec![id("B")],
            qos,
        },
        Service {
            id: "S2".into(),
            inputs: vec![id("B")],
            outputs: vec![id("A")],
            qos,
        },
    ];
    let tasks = TaskSet::new(vec![id("A")], vec![id("Z")], vec![QosmInterval::new(0.0, 1.0).unwrap()]).unwrap();
    let repo = ServiceRepository::new(ont, services).unwrap();
    assert!(matches!(
        run(&repo, &tasks, &AlgorithmConfig::default()),
        Err(EngineError::Unsolvable { task: 0, .. })
    ));
    assert!(matches!(
        run_baseline(&repo, tasks.task(0), &AlgorithmConfig::default()),
        Err(EngineError::Unsolvable { .. })
    ));
}
