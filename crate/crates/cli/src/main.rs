use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand};
use mtwsc_core::bench::{run_experiment, ExperimentSpec, InstanceSource, Method};
use mtwsc_core::engine::{AlgorithmConfig, BaselineParams};
use mtwsc_core::model::{save_repository, save_task_set};
use mtwsc_core::quality::Weights;
use mtwsc_core::synthetic::{duplicate_services, generate_synthetic, SyntheticParams};

#[derive(Parser)]
#[command(
    name = "mtwsc",
    version,
    about = "Multitask semantic web service composition experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write report.json, summary.csv and convergence traces.
    Run(RunArgs),
    /// Generate a synthetic repository and task set.
    Gen(GenArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Repository JSON file, or `gen:services=N,depth=D,branch=B,segments=K,seed=S`.
    #[arg(long)]
    instance: String,
    /// Task-set JSON file (required for file instances).
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// pmfea, pmfea-nt, pmfea-at, baseline or all; may be repeated.
    #[arg(long, default_value = "all")]
    strategy: Vec<String>,
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pop: usize,
    #[arg(long, default_value_t = 200)]
    gens: usize,
    #[arg(long, default_value_t = 0.3)]
    rmp: f64,
    /// Apply (1 - x) to the already inverted time and cost terms of the
    /// comprehensive quality (true) or use them directly (false).
    #[arg(long, visible_alias = "literal-eq2", default_value_t = true, action = ArgAction::Set)]
    literal_time_cost: bool,
    /// Significance level for the best/average/worst labels.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Write NA instead of wall times so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    services: usize,
    #[arg(long, default_value_t = 6)]
    depth: usize,
    #[arg(long, default_value_t = 4)]
    branch: usize,
    #[arg(long, default_value_t = 4)]
    segments: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Append a QoS-perturbed copy of every service.
    #[arg(long)]
    duplicate: bool,
}

fn parse_generated(spec: &str) -> Result<SyntheticParams> {
    let mut p = SyntheticParams {
        n_services: 100,
        taxonomy_depth: 6,
        branching: 4,
        k: 4,
        seed: 0,
    };
    for pair in spec.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("expected key=value, got `{pair}`"))?;
        let parse = |v: &str| v.parse::<u64>().with_context(|| format!("bad value for {key}: `{v}`"));
        match key {
            "services" => p.n_services = parse(value)? as usize,
            "depth" => p.taxonomy_depth = parse(value)? as usize,
            "branch" => p.branching = parse(value)? as usize,
            "segments" => p.k = parse(value)? as usize,
            "seed" => p.seed = parse(value)?,
            other => bail!("unknown generator parameter `{other}`"),
        }
    }
    Ok(p)
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    let mut methods = Vec::new();
    for name in names {
        let chosen: Vec<Method> = if name == "all" {
            Method::ALL.to_vec()
        } else {
            vec![Method::parse(name).with_context(|| format!("unknown strategy `{name}`"))?]
        };
        for m in chosen {
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
    }
    Ok(methods)
}

fn run(args: RunArgs) -> Result<()> {
    let source = match args.instance.strip_prefix("gen:") {
        Some(params) => InstanceSource::Generated(parse_generated(params)?),
        None => InstanceSource::Files {
            repository: PathBuf::from(&args.instance),
            tasks: args.tasks.context("--tasks is required for a repository file")?,
        },
    };
    let spec = ExperimentSpec {
        instances: vec![source],
        methods: parse_methods(&args.strategy)?,
        repetitions: args.reps,
        base_seed: args.seed,
        config: AlgorithmConfig {
            population: args.pop,
            generations: args.gens,
            rmp: args.rmp,
            weights: Weights::default(),
            literal_time_cost: args.literal_time_cost,
            seed: args.seed,
            baseline: BaselineParams::default(),
            ..AlgorithmConfig::default()
        },
        measure_time: !args.no_timing,
        alpha: args.alpha,
        out_dir: Some(args.out.clone()),
    };
    let report = run_experiment(&spec)?;
    let problems = report.verify();
    if !problems.is_empty() {
        bail!("report failed its self-consistency check:\n{}", problems.join("\n"));
    }
    print!("{}", report.summary_csv());
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let params = SyntheticParams {
        n_services: args.services,
        taxonomy_depth: args.depth,
        branching: args.branch,
        k: args.segments,
        seed: args.seed,
    };
    let (mut repo, tasks) = generate_synthetic(&params)?;
    if args.duplicate {
        repo = duplicate_services(&repo, args.seed);
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    save_repository(&repo, args.out.join("repository.json"))?;
    save_task_set(&tasks, repo.ontology(), args.out.join("tasks.json"))?;
    eprintln!(
        "wrote {} services, {} concepts, {} tasks to {}",
        repo.len(),
        repo.ontology().len(),
        tasks.len(),
        args.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Gen(args) => gen(args),
    }
}
