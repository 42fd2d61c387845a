use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mscbo::benchmarks::{self, ground_truth_oracle, load_benchmark, OracleSettings};
use mscbo::graph::{enumerate_pomis, ExplorationSet, SourceId};
use mscbo::harness::{run_experiment, ExperimentOptions, RunConfig};
use mscbo::optimizer::Algorithm;
use mscbo::scm::file::ScmFile;
use mscbo::scm::scenario::ScenarioKind;

#[derive(Parser)]
#[command(
    name = "mscbo",
    version,
    about = "Multi-source causal Bayesian optimisation experiments"
)]
struct Cli {
    /// Directory that receives every output file.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Concurrent runs (default: all CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run algorithms over seeds and write traces, summary and plot.
    Run(RunArgs),
    /// List the POMIS of a graph, best first.
    Pomis {
        /// SCM JSON file, or the name of a bundled benchmark.
        scm_file: String,
        #[arg(long)]
        output: Option<String>,
        /// Comma-separated exploration set (default: all intervenable nodes).
        #[arg(long, value_delimiter = ',')]
        exploration: Vec<String>,
    },
    /// Bundled benchmarks.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Grid-search ground truth for a benchmark.
    Oracle {
        benchmark: String,
        #[arg(long)]
        density: Option<usize>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    List,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
    /// `0..10` or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    ic: Option<f64>,
    #[arg(long)]
    oc: Option<f64>,
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long)]
    k_obs: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// base, altered_sem, altered_edges, altered_nodes (or 0-3).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    mutation_seed: Option<u64>,
    #[arg(long)]
    fantasies: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    refine_steps: Option<usize>,
    #[arg(long)]
    ckg_seed: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Keep existing trace files and only run what is missing.
    #[arg(long)]
    resume: bool,
    /// Shift every seed (CI variance probing).
    #[arg(long, env = "MSCBO_SEED_OFFSET", default_value_t = 0)]
    seed_offset: u64,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed `{x}`"))
        })
        .collect()
}

fn build_config(args: &RunArgs, output_dir: Option<PathBuf>) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.benchmark {
        c.benchmark = v.clone();
    }
    if !args.algorithms.is_empty() {
        c.algorithms = args
            .algorithms
            .iter()
            .map(|a| a.parse())
            .collect::<Result<Vec<Algorithm>, _>>()?;
    }
    if let Some(s) = &args.seeds {
        c.seeds = parse_seeds(s)?;
    }
    if let Some(v) = &args.scenario {
        c.scenario.kind =
            ScenarioKind::parse(v).with_context(|| format!("unknown scenario `{v}`"))?;
    }
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = args.$flag { c.$($field).+ = v; })*
        };
    }
    set!(
        budget => budget,
        ic => intervention_cost,
        oc => observation_cost,
        sources => sources,
        k_obs => k_obs,
        n_max => n_max,
        mutation_seed => scenario.mutation_seed,
        fantasies => ckg.fantasies,
        grid_points => ckg.grid_points,
        refine_steps => ckg.refine_steps,
        ckg_seed => ckg.seed,
        tau => tau,
    );
    if let Some(d) = output_dir {
        c.output_dir = d;
    }
    c.offset_seeds(args.seed_offset);
    c.validate()?;
    Ok(c)
}

fn load_graph_file(arg: &str) -> Result<ScmFile> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(ScmFile::read(path)?);
    }
    let text = benchmarks::source_text(arg)
        .with_context(|| format!("`{arg}` is neither a file nor a benchmark"))?;
    Ok(ScmFile::from_json(text)?)
}

fn cmd_pomis(scm_file: &str, output: Option<String>, exploration: Vec<String>) -> Result<()> {
    let mut file = load_graph_file(scm_file)?;
    if let Some(out) = output {
        file.intervenable.remove(&out);
        file.output = out;
    }
    let dag = file.dag()?;
    let vars: Vec<String> = if !exploration.is_empty() {
        exploration
    } else if let Some(ex) = &file.exploration {
        ex.clone()
    } else {
        file.intervenable.iter().cloned().collect()
    };
    let ex = ExplorationSet::new(&dag, vars.iter().map(String::as_str), SourceId(0))?;
    let sets = enumerate_pomis(&dag, &ex)?;
    let width = sets
        .iter()
        .map(|p| p.to_string().len())
        .max()
        .unwrap_or(3)
        .max(3);
    println!("{:<width$}  {:>4}  {:>8}", "set", "size", "distance");
    for p in &sets {
        println!(
            "{:<width$}  {:>4}  {:>8}",
            p.to_string(),
            p.len(),
            p.tiebreak_distance
        );
    }
    Ok(())
}

fn cmd_bench_list() -> Result<()> {
    println!(
        "{:<12} {:>5}  {:<30} {:<24} known optimum",
        "name", "nodes", "exploration", "pomis"
    );
    for name in benchmarks::names() {
        let spec = load_benchmark(name)?;
        let known = match &spec.known_optimum {
            Some(k) => {
                let a: Vec<String> = k
                    .assignment
                    .iter()
                    .map(|(n, v)| format!("{n}={v}"))
                    .collect();
                format!("{} at {}", k.value, a.join(", "))
            }
            None if !spec.is_runnable() => "graph only".into(),
            None => "-".into(),
        };
        println!(
            "{:<12} {:>5}  {:<30} {:<24} {}",
            name,
            spec.dag.len(),
            spec.exploration.variables().join(","),
            spec.pomis()?.to_string(),
            known
        );
    }
    Ok(())
}

fn cmd_oracle(name: &str, density: Option<usize>, samples: usize, seed: u64) -> Result<()> {
    let spec = load_benchmark(name)?;
    let dim = spec.pomis()?.len();
    let settings = OracleSettings {
        grid_density: density
            .unwrap_or_else(|| mscbo::harness::OracleConfig::default().density_for(dim)),
        samples,
        seed,
    };
    let r = ground_truth_oracle(&spec, &settings)?;
    let a: Vec<String> = r
        .assignment
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    println!(
        "{name}: {} {} at do({})",
        spec.objective.as_str(),
        r.value,
        a.join(", ")
    );
    if let Some(k) = &spec.known_optimum {
        println!(
            "reference value {} (difference {:+.4})",
            k.value,
            r.value - k.value
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = build_config(&args, cli.output_dir)?;
            let report = run_experiment(
                &config,
                &ExperimentOptions {
                    jobs: cli.jobs,
                    resume: args.resume,
                },
            )?;
            println!(
                "{}: oracle {:.4}, {} runs ({} resumed) -> {}",
                report.benchmark,
                report.oracle.value,
                report.traces.len(),
                report.resumed,
                config.output_dir.display()
            );
            println!(
                "{:<6} {:>12} {:>10} {:>8} {:>12}",
                "alg", "median", "iqr", "reached", "cost/interv"
            );
            for s in &report.summaries {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
                println!(
                    "{:<6} {:>12} {:>10} {:>5}/{:<2} {:>12}",
                    s.algorithm.as_str(),
                    f(s.median_final),
                    f(s.iqr_final),
                    s.reached,
                    s.runs,
                    f(s.cost_per_intervention)
                );
            }
        }
        Command::Pomis {
            scm_file,
            output,
            exploration,
        } => cmd_pomis(&scm_file, output, exploration)?,
        Command::Bench {
            command: BenchCommand::List,
        } => cmd_bench_list()?,
        Command::Oracle {
            benchmark,
            density,
            samples,
            seed,
        } => cmd_oracle(&benchmark, density, samples, seed)?,
    }
    Ok(())
}
