//! Acceptance suite. Prints one PASS/FAIL line per criterion. Exits
//! non-zero if an exact criterion (1-4, 8) fails; the directional ones
//! (5-7) are statistical and only reported.
//!
//! Run with `cargo test -p mtwsc-core --test acceptance`. The suite uses the
//! test profile (optimised) and takes a few minutes.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mtwsc_core::bench::{run_experiment, welch_t_test, ExperimentSpec, InstanceSource, Method, Report};
use mtwsc_core::decode::{check_dag, decode, forward_build, prune, Permutation};
use mtwsc_core::engine::{run, run_baseline, AlgorithmConfig, Individual, Pmfea, Strategy};
use mtwsc_core::model::{load_repository, load_task_set, ServiceRepository, TaskSet};
use mtwsc_core::quality::{Evaluator, Weights};
use mtwsc_core::synthetic::{generate_synthetic, SyntheticParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_params(rng: &mut ChaCha8Rng, max_services: usize) -> SyntheticParams {
    SyntheticParams {
        n_services: rng.random_range(2..=max_services),
        taxonomy_depth: rng.random_range(2..=6),
        branching: rng.random_range(2..=4),
        k: rng.random_range(1..=6),
        seed: rng.random(),
    }
}

/// Suite used by criteria 5 to 7: three 500-service instances with four
/// even QoSM segments.
fn suite() -> Vec<SyntheticParams> {
    (1..=3)
        .map(|seed| SyntheticParams {
            n_services: 500,
            taxonomy_depth: 6,
            branching: 4,
            k: 4,
            seed,
        })
        .collect()
}

fn fitness_separation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut triples, mut violations, mut inside) = (0usize, 0usize, 0usize);
    while triples < 1500 {
        let params = random_params(&mut rng, 200);
        let (repo, tasks) = generate_synthetic(&params).expect("generator");
        let ev = Evaluator::new(&repo, &tasks, Weights::default(), true);
        for _ in 0..4 {
            let a = ev.assess(&Permutation::random(repo.len(), &mut rng)).expect("decodes");
            for j in 0..tasks.len() {
                let cons = tasks.task(j).cons;
                let in_segment = a.qosm > cons.lo() && a.qosm <= cons.hi();
                triples += 1;
                inside += in_segment as usize;
                if (ev.fitness(&a, j) > 0.5) != in_segment {
                    violations += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && elapsed < Duration::from_secs(10),
        format!(
            "{triples} triples ({inside} inside their segment), {violations} violations, {:.2}s (limit 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn fixture() -> (ServiceRepository, TaskSet) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let repo = load_repository(dir.join("tiny.json")).expect("fixture");
    let tasks = load_task_set(dir.join("tiny.tasks.json"), repo.ontology()).expect("fixture");
    (repo, tasks)
}

fn decoder_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let (mut checked, mut bad) = (0usize, 0usize);
    while checked < 1200 {
        let params = random_params(&mut rng, 400);
        let (repo, tasks) = generate_synthetic(&params).expect("generator");
        for _ in 0..20 {
            let perm = Permutation::random(repo.len(), &mut rng);
            let dag = decode(&repo, tasks.task(0), &perm).expect("decodes");
            checked += 1;
            if !check_dag(&repo, tasks.task(0), &dag).is_empty() || prune(dag.clone()) != dag {
                bad += 1;
            }
        }
    }

    let (repo, tasks) = fixture();
    let perm = Permutation::new(vec![3, 2, 4, 0, 1]).expect("bijection");
    let built = forward_build(&repo, tasks.task(0), &perm).expect("decodes");
    let dag = prune(built.clone());
    let s4 = repo.position("S4").expect("S4");
    let redundant_removed = built.contains_service(s4) && !dag.contains_service(s4) && dag.services.len() == 3;

    let elapsed = start.elapsed();
    outcome(
        bad == 0 && redundant_removed && elapsed < Duration::from_secs(10),
        format!(
            "{checked} permutations, {bad} invalid or non-idempotent; redundant S4 admitted then pruned: {redundant_removed}; {:.2}s (limit 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn oracle_optimality() -> Outcome {
    let start = Instant::now();
    let config = AlgorithmConfig::default();
    let mut worst = (usize::MAX, String::new());
    let mut misses = Vec::new();
    for i in 0..10u64 {
        let params = SyntheticParams {
            n_services: 5 + (i as usize % 3),
            taxonomy_depth: 4,
            branching: 3,
            k: 4,
            seed: 100 + i,
        };
        let (repo, tasks) = generate_synthetic(&params).expect("generator");
        let ev = Evaluator::new(&repo, &tasks, config.weights, config.literal_time_cost);
        let mut optimum = vec![f64::NEG_INFINITY; tasks.len()];
        for order in permutations(repo.len()) {
            let a = ev
                .assess(&Permutation::new(order).expect("bijection"))
                .expect("decodes");
            for (j, best) in optimum.iter_mut().enumerate() {
                *best = best.max(ev.fitness(&a, j));
            }
        }

        let mut hits = vec![[0usize; 4]; tasks.len()];
        for seed in 0..30 {
            let seeded = AlgorithmConfig { seed, ..config };
            for (mi, strategy) in [Strategy::Vertical, Strategy::NeighborTasks, Strategy::AllTasks]
                .into_iter()
                .enumerate()
            {
                let out = run(&repo, &tasks, &AlgorithmConfig { strategy, ..seeded }).expect("runs");
                for j in 0..tasks.len() {
                    hits[j][mi] += (out.best[j].fitness == optimum[j]) as usize;
                }
            }
            for j in 0..tasks.len() {
                let out = run_baseline(&repo, tasks.task(j), &seeded).expect("runs");
                hits[j][3] += (out.best[0].fitness == optimum[j]) as usize;
            }
        }
        for (j, row) in hits.iter().enumerate() {
            for (mi, &h) in row.iter().enumerate() {
                let label = format!("instance {i} task {} {}", j + 1, Method::ALL[mi].name());
                if h < worst.0 {
                    worst = (h, label.clone());
                }
                if h < 28 {
                    misses.push(format!("{label}: {h}/30"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        misses.is_empty() && elapsed < Duration::from_secs(300),
        format!(
            "10 instances x 4 tasks x 4 algorithms; lowest hit count {}/30 ({}); {} below 28/30{}; {:.1}s (limit 300s)",
            worst.0,
            worst.1,
            misses.len(),
            if misses.is_empty() {
                String::new()
            } else {
                format!(" [{}]", misses.join("; "))
            },
            elapsed.as_secs_f64()
        ),
    )
}

/// Ranks, scalar fitness and skill recomputed from factorial costs alone.
fn recompute(pop: &[Individual]) -> Vec<(Vec<usize>, f64, usize)> {
    let k = pop[0].costs.len();
    let mut ranks = vec![vec![0usize; k]; pop.len()];
    for j in 0..k {
        let mut evaluated: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].costs.get(j).is_some()).collect();
        // stable sort keeps population order among equal costs
        evaluated.sort_by(|&a, &b| {
            pop[b]
                .costs
                .get(j)
                .unwrap()
                .partial_cmp(&pop[a].costs.get(j).unwrap())
                .unwrap()
        });
        for r in ranks.iter_mut() {
            r[j] = evaluated.len() + 1;
        }
        for (pos, &i) in evaluated.iter().enumerate() {
            ranks[i][j] = pos + 1;
        }
    }
    (0..pop.len())
        .map(|i| {
            let mut best: Option<(usize, usize)> = None;
            for (j, &rank) in ranks[i].iter().enumerate() {
                if pop[i].costs.get(j).is_some() && best.is_none_or(|(r, _)| rank < r) {
                    best = Some((rank, j));
                }
            }
            let (r, skill) = best.expect("every individual is evaluated somewhere");
            (ranks[i].clone(), 1.0 / r as f64, skill)
        })
        .collect()
}

fn bookkeeping() -> Outcome {
    let (repo, tasks) = generate_synthetic(&SyntheticParams {
        n_services: 80,
        taxonomy_depth: 5,
        branching: 3,
        k: 4,
        seed: 9,
    })
    .expect("generator");
    let (mut generations, mut mismatches) = (0usize, 0usize);
    for strategy in [Strategy::Vertical, Strategy::NeighborTasks, Strategy::AllTasks] {
        for seed in 0..3 {
            let config = AlgorithmConfig {
                generations: 40,
                strategy,
                seed,
                ..AlgorithmConfig::default()
            };
            let engine = Pmfea::new(&repo, &tasks, config).expect("config");
            engine
                .run_observed(|_, pop| {
                    generations += 1;
                    for (ind, (ranks, phi, skill)) in pop.iter().zip(recompute(pop)) {
                        if ind.ranks != ranks || ind.scalar_fitness.to_bits() != phi.to_bits() || ind.skill != skill {
                            mismatches += 1;
                        }
                    }
                })
                .expect("runs");
        }
    }
    outcome(
        mismatches == 0,
        format!("{generations} population snapshots, {mismatches} individuals differing from the recomputation"),
    )
}

fn suite_report(methods: Vec<Method>, repetitions: usize, measure_time: bool) -> Report {
    let mut spec = ExperimentSpec::new(suite().into_iter().map(InstanceSource::Generated).collect(), methods);
    spec.repetitions = repetitions;
    spec.base_seed = 1000;
    spec.measure_time = measure_time;
    run_experiment(&spec).expect("experiment")
}

fn time_advantage() -> Outcome {
    let start = Instant::now();
    let report = suite_report(
        vec![Method::Multitask(Strategy::NeighborTasks), Method::Baseline],
        10,
        true,
    );
    let mut lines = Vec::new();
    let mut pass = true;
    for params in suite() {
        let name = InstanceSource::Generated(params).name();
        let times = |strategy: &str| -> Vec<f64> {
            report
                .runs
                .iter()
                .filter(|r| r.instance == name && r.strategy == strategy)
                .map(|r| r.time_s.expect("timed"))
                .collect()
        };
        let (nt, fl) = (times("pmfea-nt"), times("baseline"));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let per_seed = nt.iter().zip(&fl).filter(|(a, b)| **a < 0.5 * **b).count();
        let ok = mean(&nt) < 0.5 * mean(&fl);
        pass &= ok;
        lines.push(format!(
            "{name}: NT {:.4}s vs 4 baseline runs {:.4}s (ratio {:.2}, {per_seed}/10 seeds under 0.5)",
            mean(&nt),
            mean(&fl),
            mean(&nt) / mean(&fl)
        ));
    }
    let elapsed = start.elapsed();
    outcome(
        pass && elapsed < Duration::from_secs(900),
        format!("{}; {:.1}s (limit 900s)", lines.join("; "), elapsed.as_secs_f64()),
    )
}

fn fitness_samples(report: &Report, instance: &str, strategy: &str, task: usize) -> Vec<f64> {
    report
        .runs
        .iter()
        .filter(|r| r.instance == instance && r.strategy == strategy)
        .map(|r| r.tasks[task].fitness)
        .collect()
}

fn neighbor_quality(report: &Report) -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for params in suite() {
        let name = InstanceSource::Generated(params).name();
        let mut satisfied = 0;
        let mut cells = Vec::new();
        for j in 0..4 {
            let nt = fitness_samples(report, &name, "pmfea-nt", j);
            let v = fitness_samples(report, &name, "pmfea", j);
            let w = welch_t_test(&nt, &v).expect("samples");
            let worse = w.p < 0.05 && w.t < 0.0;
            satisfied += (!worse) as usize;
            let verdict = if w.p >= 0.05 {
                "tie"
            } else if w.t > 0.0 {
                "NT better"
            } else {
                "NT worse"
            };
            cells.push(format!("t{} {verdict} (p={:.3})", j + 1, w.p));
        }
        pass &= satisfied >= 3;
        lines.push(format!("{name}: {satisfied}/4 [{}]", cells.join(", ")));
    }
    outcome(pass, lines.join("; "))
}

/// First generation at which a trace column reaches its final value.
fn settle_generation(report: &Report, instance: &str, strategy: &str) -> f64 {
    let mut total = 0usize;
    let mut count = 0usize;
    for r in report
        .runs
        .iter()
        .filter(|r| r.instance == instance && r.strategy == strategy)
    {
        let last = r.trace.last().expect("non-empty trace");
        for (j, &fin) in last.iter().enumerate() {
            total += r
                .trace
                .iter()
                .position(|row| row[j] == fin)
                .expect("final value occurs");
            count += 1;
        }
    }
    total as f64 / count as f64
}

/// Also returns whether the exact (monotonicity) half held.
fn convergence(report: &Report) -> (Outcome, bool) {
    let decreasing = report
        .runs
        .iter()
        .flat_map(|r| (0..r.tasks.len()).map(move |j| (r, j)))
        .filter(|(r, j)| r.trace.windows(2).any(|w| w[1][*j] < w[0][*j]))
        .count();
    let columns: usize = report.runs.iter().map(|r| r.tasks.len()).sum();
    let mut directional = true;
    let mut lines = Vec::new();
    let mut pooled = [0.0; 3];
    for params in suite() {
        let name = InstanceSource::Generated(params).name();
        let v = settle_generation(report, &name, "pmfea");
        let nt = settle_generation(report, &name, "pmfea-nt");
        let at = settle_generation(report, &name, "pmfea-at");
        directional &= nt <= v && at <= v;
        lines.push(format!(
            "{name}: mean settle generation pmfea {v:.1}, nt {nt:.1}, at {at:.1}"
        ));
        pooled.iter_mut().zip([v, nt, at]).for_each(|(p, x)| *p += x / 3.0);
    }
    lines.push(format!(
        "suite average (not the pass condition) pmfea {:.1}, nt {:.1}, at {:.1}",
        pooled[0], pooled[1], pooled[2]
    ));
    let o = outcome(
        decreasing == 0 && directional,
        format!("{columns} trace columns, {decreasing} decreasing; {}", lines.join("; ")),
    );
    (o, decreasing == 0)
}

fn reproducibility() -> Outcome {
    let dirs = [
        tempfile::tempdir().expect("tempdir"),
        tempfile::tempdir().expect("tempdir"),
    ];
    let params = SyntheticParams {
        n_services: 120,
        taxonomy_depth: 5,
        branching: 3,
        k: 4,
        seed: 77,
    };
    let mut files = Vec::new();
    for dir in &dirs {
        let mut spec = ExperimentSpec::new(vec![InstanceSource::Generated(params)], Method::ALL.to_vec());
        spec.repetitions = 5;
        spec.config.generations = 50;
        spec.measure_time = false;
        spec.out_dir = Some(dir.path().to_path_buf());
        run_experiment(&spec).expect("experiment");
        files.push(std::fs::read(dir.path().join("summary.csv")).expect("summary written"));
    }
    let identical = files[0] == files[1];
    // with timing on, everything except the time columns must still agree
    let timed: Vec<String> = (0..2)
        .map(|_| {
            let mut spec = ExperimentSpec::new(vec![InstanceSource::Generated(params)], Method::ALL.to_vec());
            spec.repetitions = 5;
            spec.config.generations = 50;
            let csv = run_experiment(&spec).expect("experiment").summary_csv();
            csv.lines()
                .map(|l| {
                    let f: Vec<&str> = l.split(',').collect();
                    format!("{},{},{},{},{},{}", f[0], f[1], f[2], f[3], f[4], f[7])
                })
                .collect::<Vec<_>>()
                .join("\n")
        })
        .collect();
    outcome(
        identical && timed[0] == timed[1],
        format!(
            "untimed summary.csv byte-identical: {identical} ({} bytes); timed runs agree outside time columns: {}",
            files[0].len(),
            timed[0] == timed[1]
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, bool, Outcome)> = Vec::new();
    let mut record = |name: &'static str, directional: bool, o: Outcome| {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, directional, o));
    };
    record("criterion 1 fitness separation", false, fitness_separation());
    record("criterion 2 decoder soundness", false, decoder_soundness());
    record("criterion 3 oracle optimality", false, oracle_optimality());
    record("criterion 4 bookkeeping equivalence", false, bookkeeping());
    record("criterion 5 multitask time advantage", true, time_advantage());
    let multitask = [Strategy::Vertical, Strategy::NeighborTasks, Strategy::AllTasks]
        .map(Method::Multitask)
        .to_vec();
    let report = suite_report(multitask, 30, false);
    record("criterion 6 neighbor-strategy quality", true, neighbor_quality(&report));
    let (o, monotone) = convergence(&report);
    // a decreasing trace is an exact failure; only the speed comparison is directional
    record("criterion 7 convergence", monotone, o);
    record("criterion 8 reproducibility", false, reproducibility());

    let failed = results.iter().filter(|(_, _, o)| !o.pass).count();
    let exact_failed = results.iter().filter(|(_, d, o)| !o.pass && !d).count();
    println!(
        "acceptance: {} passed, {failed} failed ({exact_failed} exact, {} directional)",
        results.len() - failed,
        failed - exact_failed
    );
    if exact_failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
