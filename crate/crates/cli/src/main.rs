//! Command-line front end: run a plan, compare plans, enumerate coarse
//! plans for a benchmark, or grid-scan a benchmark exhaustively.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use planopt::{
    compare_plans, enumerate_coarse_plans, execute_plan, load_benchmark, summary_csv,
    Benchmark, CostMode, Evaluator, PlanConfig, PlanNode, PlanParams, SubprocessEvaluator,
    BENCHMARK_NAMES,
};

#[derive(Parser)]
#[command(
    name = "planopt",
    version,
    about = "Plan-driven black-box optimization over declarative search spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one plan against a benchmark or an external objective.
    Run(RunArgs),
    /// Run several plans over several seeds and rank them.
    Compare(CompareArgs),
    /// Print ready-to-run plan configs for an annotated benchmark space.
    Enumerate(EnumerateArgs),
    /// Evaluate a benchmark exhaustively on a lattice.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BudgetMode {
    Count,
    Seconds,
}

impl From<BudgetMode> for CostMode {
    fn from(mode: BudgetMode) -> CostMode {
        match mode {
            BudgetMode::Count => CostMode::Count,
            BudgetMode::Seconds => CostMode::Seconds,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Plan config JSON (space, plan, params). Defaults to a joint plan
    /// when a benchmark supplies the space.
    #[arg(long)]
    plan: Option<PathBuf>,

    /// Built-in objective by name.
    #[arg(long, value_parser = BENCHMARK_NAMES)]
    benchmark: Option<String>,

    /// External objective server command line (whitespace-split); speaks
    /// line-delimited JSON on stdin/stdout. Requires --plan for the space.
    #[arg(long, conflicts_with = "benchmark")]
    objective_cmd: Option<String>,

    #[arg(long)]
    budget: Option<f64>,

    #[arg(long, value_enum)]
    budget_mode: Option<BudgetMode>,

    #[arg(long)]
    seed: Option<u64>,

    /// Per-evaluation timeout in seconds.
    #[arg(long)]
    timeout_secs: Option<f64>,

    /// Directory for trajectory.jsonl and report.json; stdout gets the
    /// report when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Built-in objective every plan runs against.
    #[arg(long, value_parser = BENCHMARK_NAMES)]
    benchmark: String,

    /// Plan config files to compare (their spaces must match the
    /// benchmark's). May be given multiple times.
    #[arg(long)]
    plan: Vec<PathBuf>,

    /// Compare the enumerated coarse plans instead of explicit files.
    #[arg(long, conflicts_with = "plan")]
    coarse: bool,

    /// Seeds as a comma list ("0,3,7") or a range ("0..10").
    #[arg(long, default_value = "0..10")]
    seeds: String,

    #[arg(long)]
    budget: Option<f64>,

    #[arg(long, value_enum)]
    budget_mode: Option<BudgetMode>,

    /// Directory for summary.csv and comparison.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long, value_parser = BENCHMARK_NAMES)]
    benchmark: String,

    #[arg(long)]
    budget: Option<f64>,

    #[arg(long, value_enum)]
    budget_mode: Option<BudgetMode>,

    #[arg(long)]
    seed: Option<u64>,

    /// Directory to write one <name>.json config per plan; stdout gets a
    /// single JSON object when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_parser = BENCHMARK_NAMES)]
    benchmark: String,

    /// Lattice points per numeric variable.
    #[arg(long, default_value_t = 100)]
    resolution: usize,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::Enumerate(args) => enumerate(args),
        Command::Oracle(args) => oracle(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn read_config(path: &Path) -> Result<PlanConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading plan config {}", path.display()))?;
    let config: PlanConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing plan config {}", path.display()))?;
    config
        .validate()
        .with_context(|| format!("validating plan config {}", path.display()))?;
    Ok(config)
}

/// The space in a plan file must be the space the objective answers for.
fn check_space_matches(config: &PlanConfig, bench: &Benchmark) -> Result<()> {
    if config.space != *bench.space() {
        bail!(
            "plan config space differs from benchmark `{}`; regenerate it with \
             `planopt enumerate --benchmark {}`",
            bench.name(),
            bench.name()
        );
    }
    Ok(())
}

fn apply_overrides(
    params: &mut PlanParams,
    budget: Option<f64>,
    budget_mode: Option<BudgetMode>,
    seed: Option<u64>,
) {
    if let Some(b) = budget {
        params.budget = b;
    }
    if let Some(mode) = budget_mode {
        params.budget_mode = mode.into();
    }
    if let Some(s) = seed {
        params.seed = s;
    }
}

fn run(args: RunArgs) -> Result<()> {
    let (mut config, evaluator): (PlanConfig, Arc<dyn Evaluator>) =
        match (&args.benchmark, &args.objective_cmd) {
            (Some(name), None) => {
                let bench = load_benchmark(name)?;
                let config = match &args.plan {
                    Some(path) => {
                        let config = read_config(path)?;
                        check_space_matches(&config, &bench)?;
                        config
                    }
                    None => PlanConfig {
                        space: bench.space().clone(),
                        plan: PlanNode::joint(),
                        params: PlanParams::default(),
                    },
                };
                (config, bench.evaluator())
            }
            (None, Some(cmd)) => {
                let path = args
                    .plan
                    .as_ref()
                    .ok_or_else(|| anyhow!("--objective-cmd needs --plan for the space"))?;
                let config = read_config(path)?;
                let words: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
                let evaluator = SubprocessEvaluator::spawn(&words)
                    .with_context(|| format!("spawning objective `{cmd}`"))?;
                (config, Arc::new(evaluator) as Arc<dyn Evaluator>)
            }
            (None, None) => bail!("pick an objective: --benchmark or --objective-cmd"),
            (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
        };

    apply_overrides(
        &mut config.params,
        args.budget,
        args.budget_mode,
        args.seed,
    );
    let timeout = args.timeout_secs.map(Duration::from_secs_f64);
    let (report, trajectory) = execute_plan(&config, evaluator, timeout)?;

    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
            let mut jsonl = Vec::new();
            for point in &trajectory {
                serde_json::to_writer(&mut jsonl, point)?;
                jsonl.push(b'\n');
            }
            fs::write(dir.join("trajectory.jsonl"), jsonl)?;
            fs::write(
                dir.join("report.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            match report.best_value {
                Some(best) => println!(
                    "best {best:.6} after {} trials ({:.1} budget spent); artifacts in {}",
                    report.trials,
                    report.spent,
                    dir.display()
                ),
                None => println!(
                    "no successful trial in {} attempts; artifacts in {}",
                    report.trials,
                    dir.display()
                ),
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().context("bad range start in --seeds")?;
        let hi: u64 = hi.trim().parse().context("bad range end in --seeds")?;
        if lo >= hi {
            bail!("--seeds range {text} is empty");
        }
        return Ok((lo..hi).collect());
    }
    let seeds = text
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("bad seed list `{text}`"))?;
    if seeds.is_empty() {
        bail!("--seeds is empty");
    }
    Ok(seeds)
}

fn compare(args: CompareArgs) -> Result<()> {
    let bench = load_benchmark(&args.benchmark)?;
    let seeds = parse_seeds(&args.seeds)?;

    let mut params = PlanParams::default();
    apply_overrides(&mut params, args.budget, args.budget_mode, None);

    let plans: Vec<(String, PlanNode)> = if args.plan.is_empty() || args.coarse {
        enumerate_coarse_plans(bench.annotations())
    } else {
        let mut out = Vec::new();
        for path in &args.plan {
            let config = read_config(path)?;
            check_space_matches(&config, &bench)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            out.push((name, config.plan));
        }
        out
    };

    let comparison = compare_plans(bench.space(), &plans, bench.evaluator(), &params, &seeds)?;

    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "plan                                mean_rank  median_best")?;
    for s in &comparison.summaries {
        writeln!(
            stdout,
            "{:<35} {:>9.2}  {:>11.4}",
            s.plan, s.mean_rank, s.median_best
        )?;
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        fs::write(dir.join("summary.csv"), summary_csv(&comparison.rows))?;
        fs::write(
            dir.join("comparison.json"),
            serde_json::to_string_pretty(&comparison)?,
        )?;
        writeln!(stdout, "artifacts in {}", dir.display())?;
    }
    Ok(())
}

fn enumerate(args: EnumerateArgs) -> Result<()> {
    let bench = load_benchmark(&args.benchmark)?;
    let mut params = PlanParams::default();
    apply_overrides(&mut params, args.budget, args.budget_mode, args.seed);

    let configs: Vec<(String, PlanConfig)> = enumerate_coarse_plans(bench.annotations())
        .into_iter()
        .map(|(name, plan)| {
            (
                name,
                PlanConfig {
                    space: bench.space().clone(),
                    plan,
                    params,
                },
            )
        })
        .collect();

    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
            for (name, config) in &configs {
                let path = dir.join(format!("{name}.json"));
                fs::write(&path, serde_json::to_string_pretty(config)?)?;
                println!("{}", path.display());
            }
        }
        None => {
            let map: serde_json::Map<String, serde_json::Value> = configs
                .into_iter()
                .map(|(name, config)| Ok((name, serde_json::to_value(config)?)))
                .collect::<Result<_>>()?;
            println!("{}", serde_json::to_string_pretty(&map)?);
        }
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let bench = load_benchmark(&args.benchmark)?;
    let points = planopt::grid_size(bench.space(), args.resolution);
    let (assignment, value) = bench
        .oracle(args.resolution)
        .with_context(|| format!("scanning `{}` at resolution {}", args.benchmark, args.resolution))?;
    let output = serde_json::json!({
        "benchmark": args.benchmark,
        "resolution": args.resolution,
        "points": points.to_string(),
        "best_value": value,
        "best_assignment": assignment,
    });
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}
