mod terminal;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dualmatch_core::harness::bench::BenchSummary;
use dualmatch_core::harness::eval::{recall_at_cost, EvaluationReport, F1_STEPS};
use dualmatch_core::harness::{evaluate_trace, run_benchmark, write_bench_report, BenchConfig, SimulatedOracle};
use dualmatch_core::ontology::serialize_alignment;
use dualmatch_core::trace::{read_trace, write_trace};
use dualmatch_core::{
    load_task_dir, run_fast_loop, Engine, EnsembleMode, Exec, FastLoopConfig, Scheduling, Strategy, TaskContext,
    TraceEvent,
};
use dualmatch_session::{serve, AppState};

#[derive(Parser)]
#[command(name = "dualmatch", version, about = "Interactive ontology matching")]
struct Cli {
    /// Run the data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate candidate pairs for a task and report blocking recall.
    Block {
        #[arg(long)]
        task: PathBuf,
        /// Write the candidate pairs as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the interactive loop with a simulated or human oracle.
    Run(RunArgs),
    /// Run a benchmark configuration and write traces, curves and a summary.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a recorded trace.
    Report {
        trace: PathBuf,
        /// Print the full evaluation as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP session API.
    Serve {
        /// Persist tasks and sessions here and reload them on start.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Task directories to register at start.
        #[arg(long)]
        task: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    /// Answers from the task's reference alignment.
    Simulated,
    /// Asks on the terminal.
    Session,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    task: PathBuf,
    #[arg(long, value_enum, default_value = "simulated")]
    oracle: OracleKind,
    /// Query budget; defaults to every candidate.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    #[arg(long, value_enum, default_value = "dualloop")]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "curated")]
    ensemble: EnsembleArg,
    #[arg(long, value_enum, default_value = "on")]
    slow_loop: Toggle,
    /// Run the slow loop on a background thread.
    #[arg(long)]
    concurrent: bool,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final alignment (session oracle only).
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Dualloop,
    Entropy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnsembleArg {
    Curated,
    Uniform,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.command {
        Command::Block { task, out } => block(&task, out.as_deref(), exec),
        Command::Run(args) => run(&args, exec),
        Command::Bench { config, out } => bench(&config, &out, exec),
        Command::Report { trace, json } => report(&trace, json),
        Command::Serve { data, task, addr } => serve_cmd(data.as_deref(), &task, addr, exec),
    }
}

fn load_context(dir: &Path, exec: Exec) -> Result<TaskContext> {
    let inputs = load_task_dir(dir).with_context(|| format!("loading task {}", dir.display()))?;
    Ok(TaskContext::from_inputs(inputs, exec)?)
}

fn block(task: &Path, out: Option<&Path>, exec: Exec) -> Result<()> {
    let ctx = load_context(task, exec)?;
    let r = &ctx.blocking;
    println!("task        {}", ctx.task_id);
    println!("classes     {} x {}", ctx.source.schema.len(), ctx.target.schema.len());
    println!("candidates  {} of {} (k = {})", r.candidates, r.universe, r.k);
    match r.recall {
        Some(recall) => println!("recall      {recall:.4} ({} of {} reference pairs)", r.truth_retained, r.truth_total),
        None => println!("recall      n/a (no reference alignment)"),
    }
    for (s, t) in r.missed.iter().take(10) {
        println!("  missed    {s} = {t}");
    }
    if let Some(path) = out {
        let pairs: Vec<serde_json::Value> = (0..ctx.len())
            .map(|i| {
                let (s, t) = ctx.pair_iris(i);
                serde_json::json!({ "pair": i, "source": s, "target": t, "key": ctx.candidates.provenance[i].id() })
            })
            .collect();
        fs::write(path, serde_json::to_string_pretty(&pairs)?)?;
    }
    Ok(())
}

fn run_config(args: &RunArgs, candidates: usize, exec: Exec) -> Result<FastLoopConfig> {
    if args.batch == 0 {
        bail!("--batch must be at least 1");
    }
    let mut config = FastLoopConfig {
        batch: args.batch,
        budget: args.budget.unwrap_or(candidates.max(args.batch)),
        strategy: match args.strategy {
            StrategyArg::Dualloop => Strategy::Dualloop,
            StrategyArg::Entropy => Strategy::Entropy,
        },
        ensemble: match args.ensemble {
            EnsembleArg::Curated => EnsembleMode::Curated,
            EnsembleArg::Uniform => EnsembleMode::Uniform,
        },
        slow_loop: args.slow_loop == Toggle::On,
        scheduling: if args.concurrent { Scheduling::Concurrent } else { Scheduling::Deterministic },
        seed: args.seed,
        exec,
        ..Default::default()
    };
    if let Some(delta) = args.delta {
        config.slow.delta = delta;
    }
    config.validate()?;
    Ok(config)
}

fn save_trace(path: &Path, events: &[TraceEvent]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_trace(&mut out, events)?;
    out.flush()?;
    Ok(())
}

fn run(args: &RunArgs, exec: Exec) -> Result<()> {
    let ctx = Arc::new(load_context(&args.task, exec)?);
    let config = run_config(args, ctx.len(), exec)?;
    let events = match args.oracle {
        OracleKind::Simulated => {
            let mut oracle = SimulatedOracle::new(&ctx)?;
            let outcome = run_fast_loop(ctx.clone(), &mut oracle, config)?;
            if let Some(reason) = &outcome.aborted {
                bail!("run aborted: {reason}");
            }
            outcome.events
        }
        OracleKind::Session => {
            let mut engine = Engine::new(ctx.clone(), config)?;
            let stdin = io::stdin();
            let mut input = stdin.lock();
            let mut out = io::stdout();
            terminal::annotate(&mut engine, &mut input, &mut out)?;
            let alignment = terminal::verify(&mut engine, &mut input, &mut out)?;
            println!("final alignment: {} matches", alignment.len());
            if let Some(path) = &args.export {
                let pairs = alignment.iter().map(|&i| {
                    let (s, t) = ctx.pair_iris(i);
                    (s.to_string(), t.to_string())
                });
                fs::write(path, serialize_alignment(pairs))?;
            }
            engine.into_outcome().events
        }
    };
    if let Some(path) = &args.trace {
        save_trace(path, &events)?;
    }
    if ctx.truth.is_some() {
        print_report(&evaluate_trace(&events)?);
    }
    Ok(())
}

fn print_report(r: &EvaluationReport) {
    println!("task {}: {} candidates, budget {}, batch {}", r.task, r.candidates, r.budget, r.batch);
    println!(
        "strategy {:?}, ensemble {:?}, slow loop {}, seed {}",
        r.strategy,
        r.ensemble,
        if r.slow_loop { "on" } else { "off" },
        r.seed
    );
    println!("annotated {} ({} matches), publications {}", r.annotated, r.annotated_matches, r.publications);
    if r.truth_total > 0 {
        println!("reference matches {} ({} kept by blocking)", r.truth_total, r.truth_retained);
        let limit = (0.2 * r.candidates as f64).floor() as usize;
        println!("recall at cost {limit} (20% of |X|): {:.4}", recall_at_cost(&r.recall_curve, limit));
        for level in &r.cost_to_recall {
            match level.cost {
                Some(cost) => println!("cost to recall {:.2}: {cost}", level.level),
                None => println!("cost to recall {:.2}: not reached", level.level),
            }
        }
        let f1: Vec<String> = r
            .f1_curve
            .iter()
            .step_by(F1_STEPS / 10)
            .map(|p| format!("{:.0}%:{:.3}", p.budget_fraction * 100.0, p.f1))
            .collect();
        println!("f1 by budget {}", f1.join(" "));
    }
    if let (Some(cost), Some(recall)) = (r.final_cost, r.final_recall) {
        println!("final cost {cost}, final recall {recall:.4}");
    }
    if r.response.count > 0 {
        println!(
            "response time mean {:.2} ms, p95 {:.2} ms, max {:.2} ms",
            r.response.mean * 1000.0,
            r.response.p95 * 1000.0,
            r.response.max * 1000.0
        );
    }
    if let Some(reason) = &r.aborted {
        println!("aborted: {reason}");
    }
}

fn bench(config_path: &Path, out: &Path, exec: Exec) -> Result<()> {
    let doc = fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let config = BenchConfig::parse(&doc)?;
    let result = run_benchmark(&config, exec)?;
    write_bench_report(out, &result)?;
    print_summary(&result.summary);
    println!("wrote {}", out.display());
    if result.summary.failures.len() == result.runs.len() {
        bail!("every run failed");
    }
    Ok(())
}

fn print_summary(summary: &BenchSummary) {
    println!(
        "{:<18} {:>5} {:>7} {:>16} {:>14} {:>12}",
        "variant",
        "runs",
        "failed",
        format!("recall@{:.0}%cost", summary.recall_cost_fraction * 100.0),
        "cost@90%",
        "final recall"
    );
    for v in &summary.variants {
        let at90 = v.cost_to_recall.iter().find(|l| (l.level - 0.9).abs() < 1e-9);
        let at90 = match at90 {
            Some(l) if l.cost.n > 0 => format!("{:.1} ({} miss)", l.cost.mean, l.not_reached),
            Some(l) => format!("- ({} miss)", l.not_reached),
            None => "-".into(),
        };
        println!(
            "{:<18} {:>5} {:>7} {:>9.4}±{:<6.4} {:>14} {:>12.4}",
            v.variant.id(),
            v.runs,
            v.failed,
            v.recall_at_cost.mean,
            v.recall_at_cost.ci95,
            at90,
            v.final_recall.mean
        );
    }
    for failure in &summary.failures {
        println!("failed: {failure}");
    }
}

fn report(path: &Path, json: bool) -> Result<()> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let events = read_trace(io::BufReader::new(file))?;
    let r = evaluate_trace(&events)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        print_report(&r);
    }
    Ok(())
}

fn serve_cmd(data: Option<&Path>, tasks: &[PathBuf], addr: SocketAddr, exec: Exec) -> Result<()> {
    let state = match data {
        Some(dir) => AppState::open(dir).with_context(|| format!("opening {}", dir.display()))?,
        None => AppState::in_memory(),
    };
    for dir in tasks {
        let ctx = load_context(dir, exec)?;
        match state.add_task(ctx) {
            Ok(summary) => log::info!("task {}: {} candidates", summary.task_id, summary.candidates),
            Err(e) => log::warn!("{}: {e}", dir.display()),
        }
    }
    serve(state, addr)?;
    Ok(())
}
