//! Benchmark runner: every (task, variant, seed) run with the simulated
//! oracle, plus per-variant aggregates with 95% confidence intervals.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::eval::{aggregate, evaluate_trace, recall_at_cost, Aggregate, EvaluationReport, RECALL_LEVELS};
use super::oracle::SimulatedOracle;
use super::synthetic::{generate_synthetic_task, SyntheticSpec};
use crate::committee::EnsembleMode;
use crate::context::{load_task_dir, TaskContext};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fast_loop::{run_fast_loop, FastLoopConfig, Scheduling, Strategy};
use crate::features::Providers;
use crate::slow_loop::DEFAULT_DELTA;
use crate::trace::{write_trace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Dualloop,
    NoSlowLoop,
    Entropy,
    UniformEnsemble,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Dualloop, Variant::NoSlowLoop, Variant::Entropy, Variant::UniformEnsemble];

    pub fn id(self) -> &'static str {
        match self {
            Variant::Dualloop => "dualloop",
            Variant::NoSlowLoop => "no-slow-loop",
            Variant::Entropy => "entropy",
            Variant::UniformEnsemble => "uniform-ensemble",
        }
    }

    pub fn apply(self, config: &mut FastLoopConfig) {
        match self {
            Variant::Dualloop => {}
            Variant::NoSlowLoop => config.slow_loop = false,
            Variant::Entropy => config.strategy = Strategy::Entropy,
            Variant::UniformEnsemble => config.ensemble = EnsembleMode::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchTask {
    /// Generated per run seed: the task seed is `seed_offset + run seed`.
    Synthetic {
        name: String,
        n_source: usize,
        n_target: usize,
        match_rate: f64,
        noise: f64,
        #[serde(default)]
        rename: f64,
        #[serde(default)]
        seed_offset: u64,
    },
    /// A task directory shared by all seeds.
    Dir { name: String, path: PathBuf },
}

impl BenchTask {
    pub fn name(&self) -> &str {
        match self {
            BenchTask::Synthetic { name, .. } | BenchTask::Dir { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub tasks: Vec<BenchTask>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub batch: usize,
    /// Query budget as a fraction of |X|; 1.0 allows labeling every candidate.
    pub budget_fraction: f64,
    pub delta: f64,
    pub concurrent: bool,
    /// Cost limit, as a fraction of |X|, for the recall-at-cost summary.
    pub recall_cost_fraction: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            tasks: Vec::new(),
            variants: vec![Variant::Dualloop],
            seeds: vec![0],
            batch: 10,
            budget_fraction: 1.0,
            delta: DEFAULT_DELTA,
            concurrent: false,
            recall_cost_fraction: 0.2,
        }
    }
}

impl BenchConfig {
    pub fn parse(doc: &str) -> Result<Self> {
        serde_json::from_str(doc).map_err(|e| Error::Parse { context: "bench config".into(), message: e.to_string() })
    }

    pub fn run_config(&self, candidates: usize, variant: Variant, seed: u64, exec: Exec) -> FastLoopConfig {
        let budget = ((self.budget_fraction * candidates as f64).round() as usize).max(self.batch);
        let mut config = FastLoopConfig {
            batch: self.batch,
            budget,
            seed,
            scheduling: if self.concurrent { Scheduling::Concurrent } else { Scheduling::Deterministic },
            exec,
            ..FastLoopConfig::default()
        };
        config.slow.delta = self.delta;
        variant.apply(&mut config);
        config
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub task: String,
    pub variant: Variant,
    pub seed: u64,
    pub events: Vec<TraceEvent>,
    pub report: Option<EvaluationReport>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn file_stem(&self) -> String {
        format!("{}__{}__{}", sanitize(&self.task), self.variant.id(), self.seed)
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: f64,
    /// Mean over runs that reached the level.
    pub cost: Aggregate,
    pub not_reached: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub failed: usize,
    pub recall_at_cost: Aggregate,
    pub cost_to_recall: Vec<LevelSummary>,
    pub final_recall: Aggregate,
    /// Mean F1 at each 2% budget step.
    pub f1_curve: Vec<(f64, Aggregate)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub recall_cost_fraction: f64,
    pub variants: Vec<VariantSummary>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub runs: Vec<RunRecord>,
    pub summary: BenchSummary,
}

/// Builds the task for `seed`. Synthetic tasks depend on it, directories do not.
pub fn build_task(task: &BenchTask, seed: u64, exec: Exec) -> Result<TaskContext> {
    match task {
        BenchTask::Synthetic { n_source, n_target, match_rate, noise, rename, seed_offset, .. } => {
            let spec = SyntheticSpec {
                seed: seed_offset + seed,
                n_source: *n_source,
                n_target: *n_target,
                match_rate: *match_rate,
                noise: *noise,
                rename: *rename,
            };
            let synthetic = generate_synthetic_task(&spec)?;
            TaskContext::build(synthetic.task, Some(synthetic.lexicon), &Providers::builtin(), exec)
        }
        BenchTask::Dir { path, .. } => TaskContext::from_inputs(load_task_dir(path)?, exec),
    }
}

pub fn run_one(ctx: Arc<TaskContext>, config: FastLoopConfig) -> Result<Vec<TraceEvent>> {
    let mut oracle = SimulatedOracle::new(&ctx)?;
    let outcome = run_fast_loop(ctx, &mut oracle, config)?;
    Ok(outcome.events)
}

pub fn run_benchmark(config: &BenchConfig, exec: Exec) -> Result<BenchResult> {
    if config.tasks.is_empty() || config.variants.is_empty() || config.seeds.is_empty() {
        return Err(Error::Config("bench config needs tasks, variants and seeds".into()));
    }
    let mut jobs = Vec::new();
    for task in &config.tasks {
        for &seed in &config.seeds {
            jobs.push((task, seed));
        }
    }
    // Runs are parallel across (task, seed); each run itself stays sequential
    // so that run-level parallelism does the work.
    let per_task = exec.map(&jobs, |&(task, seed)| {
        let ctx = build_task(task, seed, Exec::Sequential).map(Arc::new);
        config
            .variants
            .iter()
            .map(|&variant| {
                let mut record = RunRecord {
                    task: task.name().to_string(),
                    variant,
                    seed,
                    events: Vec::new(),
                    report: None,
                    error: None,
                };
                let result = ctx.as_ref().map_err(|e| e.to_string()).and_then(|ctx| {
                    let run_config = config.run_config(ctx.len(), variant, seed, Exec::Sequential);
                    run_one(ctx.clone(), run_config).map_err(|e| e.to_string())
                });
                match result.and_then(|events| evaluate_trace(&events).map(|r| (events, r)).map_err(|e| e.to_string()))
                {
                    Ok((events, report)) => {
                        record.events = events;
                        record.report = Some(report);
                    }
                    Err(e) => {
                        log::error!("run {} / {} / {seed} failed: {e}", task.name(), variant.id());
                        record.error = Some(e);
                    }
                }
                record
            })
            .collect::<Vec<_>>()
    });
    let runs: Vec<RunRecord> = per_task.into_iter().flatten().collect();
    let summary = summarize(&runs, config);
    Ok(BenchResult { runs, summary })
}

pub fn summarize(runs: &[RunRecord], config: &BenchConfig) -> BenchSummary {
    let mut variants = Vec::new();
    for &variant in &config.variants {
        let of: Vec<&RunRecord> = runs.iter().filter(|r| r.variant == variant).collect();
        let reports: Vec<&EvaluationReport> = of.iter().filter_map(|r| r.report.as_ref()).collect();
        let recall_at: Vec<f64> = reports
            .iter()
            .map(|r| {
                let limit = (config.recall_cost_fraction * r.candidates as f64).floor() as usize;
                recall_at_cost(&r.recall_curve, limit)
            })
            .collect();
        let cost_to_recall = RECALL_LEVELS
            .iter()
            .enumerate()
            .map(|(i, &level)| {
                let reached: Vec<f64> =
                    reports.iter().filter_map(|r| r.cost_to_recall[i].cost).map(|c| c as f64).collect();
                LevelSummary { level, not_reached: reports.len() - reached.len(), cost: aggregate(&reached) }
            })
            .collect();
        let final_recall: Vec<f64> = reports.iter().filter_map(|r| r.final_recall).collect();
        let steps = reports.first().map_or(0, |r| r.f1_curve.len());
        let f1_curve = (0..steps)
            .map(|i| {
                let values: Vec<f64> = reports.iter().map(|r| r.f1_curve[i].f1).collect();
                (reports[0].f1_curve[i].budget_fraction, aggregate(&values))
            })
            .collect();
        variants.push(VariantSummary {
            variant,
            runs: of.len(),
            failed: of.len() - reports.len(),
            recall_at_cost: aggregate(&recall_at),
            cost_to_recall,
            final_recall: aggregate(&final_recall),
            f1_curve,
        });
    }
    let failures = runs.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.file_stem()))).collect();
    BenchSummary { recall_cost_fraction: config.recall_cost_fraction, variants, failures }
}

/// Writes `traces/*.jsonl`, `curves/*_f1.csv`, `curves/*_recall.csv` and
/// `summary.json` below `out`.
pub fn write_bench_report(out: &Path, result: &BenchResult) -> Result<()> {
    let traces = out.join("traces");
    let curves = out.join("curves");
    fs::create_dir_all(&traces)?;
    fs::create_dir_all(&curves)?;
    for run in &result.runs {
        let stem = run.file_stem();
        if !run.events.is_empty() {
            let mut file = std::io::BufWriter::new(fs::File::create(traces.join(format!("{stem}.jsonl")))?);
            write_trace(&mut file, &run.events)?;
        }
        if let Some(report) = &run.report {
            let mut f1 = String::from("budget_fraction,f1\n");
            for p in &report.f1_curve {
                f1.push_str(&format!("{},{}\n", p.budget_fraction, p.f1));
            }
            fs::write(curves.join(format!("{stem}_f1.csv")), f1)?;
            let mut rc = String::from("cost,recall\n");
            for p in &report.recall_curve {
                rc.push_str(&format!("{},{}\n", p.cost, p.recall));
            }
            fs::write(curves.join(format!("{stem}_recall.csv")), rc)?;
        }
    }
    let summary = serde_json::to_string_pretty(&result.summary).map_err(|e| Error::Trace(e.to_string()))?;
    fs::write(out.join("summary.json"), summary)?;
    Ok(())
}
