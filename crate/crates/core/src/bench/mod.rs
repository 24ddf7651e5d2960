//! Seeded experiment grids: every method × instance × repetition, summary
//! statistics with significance labels, and CSV/JSON output.
//!
//! Output files written to [`ExperimentSpec::out_dir`]:
//!
//! * `report.json`: the full [`Report`], including every per-run record and
//!   its convergence trace.
//! * `summary.csv`: `instance,strategy,task,mean_fitness,sd_fitness,mean_time_s,sd_time_s,label`.
//!   Tasks are numbered from 1; the extra `all` row per strategy carries the
//!   wall time of solving every task (one multitask run, or the sum of the
//!   K baseline runs). Missing values are written as `NA`.
//! * `convergence_{instance}_rep{r}.csv`: `generation` followed by one
//!   best-so-far column `{strategy}_t{j}` per strategy and task.
//! * `best_{instance}_{strategy}_t{j}.{txt,dot}`: the best composition of
//!   repetition 0.

pub mod stats;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, AlgorithmConfig, EngineError, RunOutcome, Strategy};
use crate::model::{load_repository, load_task_set, ModelError, ServiceRepository, TaskSet};
use crate::synthetic::{generate_synthetic, SyntheticParams};
pub use stats::{label_samples, mean, sample_sd, welch_t_test, Label, StatsError, WelchTest};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Multitask(Strategy),
    Baseline,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Multitask(Strategy::Vertical),
        Method::Multitask(Strategy::NeighborTasks),
        Method::Multitask(Strategy::AllTasks),
        Method::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Multitask(s) => s.name(),
            Method::Baseline => "baseline",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InstanceSource {
    Files { repository: PathBuf, tasks: PathBuf },
    Generated(SyntheticParams),
}

impl InstanceSource {
    pub fn name(&self) -> String {
        match self {
            InstanceSource::Files { repository, .. } => repository
                .file_stem()
                .map_or_else(|| "instance".to_string(), |s| s.to_string_lossy().into_owned()),
            InstanceSource::Generated(p) => format!(
                "gen-n{}-d{}-b{}-k{}-s{}",
                p.n_services, p.taxonomy_depth, p.branching, p.k, p.seed
            ),
        }
    }

    pub fn load(&self) -> Result<(ServiceRepository, TaskSet), BenchError> {
        match self {
            InstanceSource::Files { repository, tasks } => {
                let repo = load_repository(repository)?;
                let tasks = load_task_set(tasks, repo.ontology())?;
                Ok((repo, tasks))
            }
            InstanceSource::Generated(p) => Ok(generate_synthetic(p)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instances: Vec<InstanceSource>,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub base_seed: u64,
    /// Shared settings; `seed` and `strategy` are overridden per run.
    pub config: AlgorithmConfig,
    /// Record wall times. When false every time column reads `NA`, which
    /// makes repeated experiments byte-identical.
    pub measure_time: bool,
    pub alpha: f64,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(instances: Vec<InstanceSource>, methods: Vec<Method>) -> Self {
        Self {
            instances,
            methods,
            repetitions: 30,
            base_seed: 42,
            config: AlgorithmConfig::default(),
            measure_time: true,
            alpha: 0.05,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.repetitions == 0 {
            return Err(BenchError::Spec("repetitions must be >= 1".into()));
        }
        if self.instances.is_empty() || self.methods.is_empty() {
            return Err(BenchError::Spec("need at least one instance and one strategy".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(BenchError::Spec(format!("strategy {} listed twice", m.name())));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BenchError::Spec(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        self.config.validate()?;
        Ok(())
    }
}

/// One task's result inside a [`RunRecord`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub fitness: f64,
    pub comprehensive: f64,
    pub qosm: f64,
    pub services: Vec<String>,
    /// Time spent on this task alone; only the baseline has one.
    pub time_s: Option<f64>,
}

/// One method on one instance for one repetition, covering all K tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub strategy: String,
    pub repetition: usize,
    pub seed: u64,
    pub tasks: Vec<TaskRecord>,
    /// Wall time for all tasks (sum of per-task times for the baseline).
    pub time_s: Option<f64>,
    pub decodes: usize,
    /// `trace[g][j]`, best-so-far fitness.
    pub trace: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub instance: String,
    pub strategy: String,
    /// 1-based task number, or `all`.
    pub task: String,
    pub mean_fitness: Option<f64>,
    pub sd_fitness: Option<f64>,
    pub mean_time_s: Option<f64>,
    pub sd_time_s: Option<f64>,
    pub label: Option<Label>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub instance: String,
    pub task: usize,
    pub a: String,
    pub b: String,
    pub t: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub pairwise: Vec<PairwiseTest>,
}

/// Result of [`run_method`]: the parts of a [`RunRecord`] a run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodRun {
    pub tasks: Vec<TaskRecord>,
    pub time_s: Option<f64>,
    pub decodes: usize,
    pub trace: Vec<Vec<f64>>,
}

/// Runs one method once on a loaded instance.
pub fn run_method(
    repo: &ServiceRepository,
    tasks: &TaskSet,
    method: Method,
    config: &AlgorithmConfig,
    measure_time: bool,
) -> Result<MethodRun, BenchError> {
    let record = |o: &RunOutcome, j: usize, time_s| TaskRecord {
        fitness: o.best[j].fitness,
        comprehensive: o.best[j].assessment.comprehensive,
        qosm: o.best[j].assessment.qosm,
        services: o.best[j]
            .assessment
            .dag
            .services
            .iter()
            .map(|&s| repo.service(s).id.clone())
            .collect(),
        time_s,
    };
    match method {
        Method::Multitask(strategy) => {
            let cfg = AlgorithmConfig { strategy, ..*config };
            let start = Instant::now();
            let outcome = engine::run(repo, tasks, &cfg)?;
            let elapsed = start.elapsed().as_secs_f64();
            let records = (0..tasks.len()).map(|j| record(&outcome, j, None)).collect();
            Ok(MethodRun {
                tasks: records,
                time_s: measure_time.then_some(elapsed),
                decodes: outcome.decodes,
                trace: outcome.trace,
            })
        }
        Method::Baseline => {
            let mut records = Vec::with_capacity(tasks.len());
            let mut traces = Vec::with_capacity(tasks.len());
            let mut decodes = 0;
            let mut total = 0.0;
            for j in 0..tasks.len() {
                let start = Instant::now();
                let outcome = engine::run_baseline(repo, tasks.task(j), config)?;
                let elapsed = start.elapsed().as_secs_f64();
                total += elapsed;
                decodes += outcome.decodes;
                records.push(record(&outcome, 0, measure_time.then_some(elapsed)));
                traces.push(outcome.trace);
            }
            let trace = (0..traces[0].len())
                .map(|g| traces.iter().map(|t| t[g][0]).collect())
                .collect();
            Ok(MethodRun {
                tasks: records,
                time_s: measure_time.then_some(total),
                decodes,
                trace,
            })
        }
    }
}

/// Runs the whole grid, then writes the output files if `out_dir` is set.
///
/// Repetitions run one after another so that no run's wall time includes
/// contention with another; each run still evaluates its batches in
/// parallel.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report, BenchError> {
    spec.validate()?;
    let mut runs = Vec::new();
    for source in &spec.instances {
        let name = source.name();
        let (repo, tasks) = source.load()?;
        for r in 0..spec.repetitions {
            let seed = spec.base_seed.wrapping_add(r as u64);
            let config = AlgorithmConfig { seed, ..spec.config };
            for &method in &spec.methods {
                let run = run_method(&repo, &tasks, method, &config, spec.measure_time)?;
                runs.push(RunRecord {
                    instance: name.clone(),
                    strategy: method.name().to_string(),
                    repetition: r,
                    seed,
                    tasks: run.tasks,
                    time_s: run.time_s,
                    decodes: run.decodes,
                    trace: run.trace,
                });
            }
        }
        if let Some(dir) = &spec.out_dir {
            write_best_compositions(spec, &name, &repo, &tasks, dir)?;
        }
    }
    let (summary, pairwise) = summarize(spec, &runs)?;
    let report = Report {
        spec: spec.clone(),
        runs,
        summary,
        pairwise,
    };
    if let Some(dir) = &spec.out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

fn runs_of<'r>(runs: &'r [RunRecord], instance: &'r str, strategy: &'r str) -> impl Iterator<Item = &'r RunRecord> {
    runs.iter()
        .filter(move |r| r.instance == instance && r.strategy == strategy)
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        (None, None)
    } else {
        (Some(mean(xs)), sample_sd(xs))
    }
}

fn instance_names(spec: &ExperimentSpec) -> Vec<String> {
    spec.instances.iter().map(InstanceSource::name).collect()
}

/// Computes summary rows and pairwise tests from per-run records.
pub fn summarize(
    spec: &ExperimentSpec,
    runs: &[RunRecord],
) -> Result<(Vec<SummaryRow>, Vec<PairwiseTest>), BenchError> {
    let mut summary = Vec::new();
    let mut pairwise = Vec::new();
    for instance in instance_names(spec) {
        let k = runs
            .iter()
            .find(|r| r.instance == instance)
            .map_or(0, |r| r.tasks.len());
        let labels = significance_labels(spec, runs, &instance, k, &mut pairwise)?;
        for (mi, method) in spec.methods.iter().enumerate() {
            let name = method.name();
            for j in 0..k {
                let fit: Vec<f64> = runs_of(runs, &instance, name).map(|r| r.tasks[j].fitness).collect();
                let time: Vec<f64> = runs_of(runs, &instance, name)
                    .filter_map(|r| r.tasks[j].time_s)
                    .collect();
                let (mean_fitness, sd_fitness) = mean_sd(&fit);
                let (mean_time_s, sd_time_s) = mean_sd(&time);
                summary.push(SummaryRow {
                    instance: instance.clone(),
                    strategy: name.to_string(),
                    task: (j + 1).to_string(),
                    mean_fitness,
                    sd_fitness,
                    mean_time_s,
                    sd_time_s,
                    label: labels.as_ref().map(|l| l[j][mi]),
                });
            }
            let time: Vec<f64> = runs_of(runs, &instance, name).filter_map(|r| r.time_s).collect();
            let (mean_time_s, sd_time_s) = mean_sd(&time);
            summary.push(SummaryRow {
                instance: instance.clone(),
                strategy: name.to_string(),
                task: "all".into(),
                mean_fitness: None,
                sd_fitness: None,
                mean_time_s,
                sd_time_s,
                label: None,
            });
        }
    }
    Ok((summary, pairwise))
}

/// `labels[j][method]`, or `None` with fewer than two repetitions.
fn significance_labels(
    spec: &ExperimentSpec,
    runs: &[RunRecord],
    instance: &str,
    k: usize,
    pairwise: &mut Vec<PairwiseTest>,
) -> Result<Option<Vec<Vec<Label>>>, BenchError> {
    if spec.repetitions < 2 {
        return Ok(None);
    }
    let mut labels = Vec::with_capacity(k);
    for j in 0..k {
        let samples: Vec<Vec<f64>> = spec
            .methods
            .iter()
            .map(|m| runs_of(runs, instance, m.name()).map(|r| r.tasks[j].fitness).collect())
            .collect();
        for a in 0..samples.len() {
            for b in a + 1..samples.len() {
                let w = welch_t_test(&samples[a], &samples[b])?;
                pairwise.push(PairwiseTest {
                    instance: instance.to_string(),
                    task: j + 1,
                    a: spec.methods[a].name().to_string(),
                    b: spec.methods[b].name().to_string(),
                    t: w.t,
                    p: w.p,
                });
            }
        }
        let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
        labels.push(label_samples(&refs, spec.alpha)?);
    }
    Ok(Some(labels))
}

/// Per-task best/average/worst labels as `(instance, task, strategy, label)`,
/// tasks 1-based.
pub fn significance_summary(report: &Report, alpha: f64) -> Result<Vec<(String, usize, String, Label)>, BenchError> {
    let spec = ExperimentSpec {
        alpha,
        ..report.spec.clone()
    };
    let (rows, _) = summarize(&spec, &report.runs)?;
    Ok(rows
        .into_iter()
        .filter_map(|r| {
            let task = r.task.parse().ok()?;
            Some((r.instance, task, r.strategy, r.label?))
        })
        .collect())
}

impl Report {
    /// Recomputes every aggregate from the per-run records and checks the
    /// structural invariants. Returns the list of discrepancies.
    pub fn verify(&self) -> Vec<String> {
        let mut problems = Vec::new();
        match summarize(&self.spec, &self.runs) {
            Ok((summary, pairwise)) => {
                if summary != self.summary {
                    problems.push("summary rows differ from recomputation".into());
                }
                if pairwise != self.pairwise {
                    problems.push("pairwise tests differ from recomputation".into());
                }
            }
            Err(e) => problems.push(format!("recomputation failed: {e}")),
        }
        for r in &self.runs {
            let id = format!("{}/{}/rep{}", r.instance, r.strategy, r.repetition);
            if r.strategy == Method::Baseline.name() {
                if let Some(total) = r.time_s {
                    let sum: f64 = r.tasks.iter().filter_map(|t| t.time_s).sum();
                    if (sum - total).abs() > 1e-9 {
                        problems.push(format!("{id}: per-task times sum to {sum}, total is {total}"));
                    }
                }
            }
            for j in 0..r.tasks.len() {
                if r.trace.windows(2).any(|w| w[1][j] < w[0][j]) {
                    problems.push(format!("{id}: trace of task {} decreases", j + 1));
                }
                if r.trace.last().map(|last| last[j]) != Some(r.tasks[j].fitness) {
                    problems.push(format!(
                        "{id}: final trace value of task {} is not the best fitness",
                        j + 1
                    ));
                }
            }
        }
        problems
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("instance,strategy,task,mean_fitness,sd_fitness,mean_time_s,sd_time_s,label\n");
        for row in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                row.instance,
                row.strategy,
                row.task,
                fmt_opt(row.mean_fitness),
                fmt_opt(row.sd_fitness),
                fmt_opt(row.mean_time_s),
                fmt_opt(row.sd_time_s),
                row.label.map_or("NA", Label::as_str),
            );
        }
        out
    }

    /// Convergence table of one instance and repetition.
    pub fn convergence_csv(&self, instance: &str, repetition: usize) -> String {
        let runs: Vec<&RunRecord> = self
            .runs
            .iter()
            .filter(|r| r.instance == instance && r.repetition == repetition)
            .collect();
        let mut out = String::from("generation");
        for r in &runs {
            for j in 0..r.tasks.len() {
                let _ = write!(out, ",{}_t{}", r.strategy, j + 1);
            }
        }
        out.push('\n');
        let generations = runs.first().map_or(0, |r| r.trace.len());
        for g in 0..generations {
            let _ = write!(out, "{g}");
            for r in &runs {
                for v in &r.trace[g] {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), BenchError> {
    fs::write(path, contents).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(|source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_report(report: &Report, dir: &Path) -> Result<(), BenchError> {
    create_dir(dir)?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_file(&dir.join("report.json"), &json)?;
    write_file(&dir.join("summary.csv"), &report.summary_csv())?;
    for instance in instance_names(&report.spec) {
        for r in 0..report.spec.repetitions {
            let path = dir.join(format!("convergence_{instance}_rep{r:03}.csv"));
            write_file(&path, &report.convergence_csv(&instance, r))?;
        }
    }
    Ok(())
}

/// Re-runs repetition 0 of every method and exports its best DAGs.
fn write_best_compositions(
    spec: &ExperimentSpec,
    instance: &str,
    repo: &ServiceRepository,
    tasks: &TaskSet,
    dir: &Path,
) -> Result<(), BenchError> {
    create_dir(dir)?;
    let config = AlgorithmConfig {
        seed: spec.base_seed,
        ..spec.config
    };
    for &method in &spec.methods {
        let outcomes: Vec<RunOutcome> = match method {
            Method::Multitask(strategy) => vec![engine::run(repo, tasks, &AlgorithmConfig { strategy, ..config })?],
            Method::Baseline => (0..tasks.len())
                .map(|j| engine::run_baseline(repo, tasks.task(j), &config))
                .collect::<Result<_, _>>()?,
        };
        let dags = outcomes.iter().flat_map(|o| o.best.iter().map(|b| &b.assessment.dag));
        for (j, dag) in dags.enumerate() {
            let stem = format!("best_{instance}_{}_t{}", method.name(), j + 1);
            write_file(&dir.join(format!("{stem}.txt")), &dag.to_adjacency_text(repo))?;
            write_file(&dir.join(format!("{stem}.dot")), &dag.to_dot(repo))?;
        }
    }
    Ok(())
}
