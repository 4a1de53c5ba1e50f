//! Sequential against data-parallel execution of the heavy inner loops:
//! task preparation (embedding, blocking, features, initial votes), the
//! committee pass over every candidate and one slow-loop iteration.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dualmatch_core::features::Providers;
use dualmatch_core::harness::{generate_synthetic_task, SimulatedOracle, SyntheticSpec, SyntheticTask};
use dualmatch_core::slow_loop::{SlowLoop, SlowSnapshot};
use dualmatch_core::{run_fast_loop, Engine, Exec, FastLoopConfig, TaskContext};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn task() -> SyntheticTask {
    generate_synthetic_task(&SyntheticSpec {
        seed: 5,
        n_source: 80,
        n_target: 150,
        match_rate: 0.01,
        noise: 0.5,
        rename: 0.2,
    })
    .expect("valid spec")
}

fn context() -> Arc<TaskContext> {
    let t = task();
    Arc::new(TaskContext::build(t.task, Some(t.lexicon), &Providers::builtin(), Exec::Parallel).expect("task builds"))
}

fn task_build(c: &mut Criterion) {
    let t = task();
    let mut group = c.benchmark_group("task_build");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| TaskContext::build(t.task.clone(), Some(t.lexicon.clone()), &Providers::builtin(), exec).unwrap())
        });
    }
    group.finish();
}

/// An engine 60 annotations into a run, committee curated.
fn warmed_engine(ctx: &Arc<TaskContext>) -> Engine {
    let config = FastLoopConfig { batch: 10, budget: 60, ..Default::default() };
    let mut oracle = SimulatedOracle::new(ctx).unwrap();
    let outcome = run_fast_loop(ctx.clone(), &mut oracle, config.clone()).unwrap();
    Engine::replay(ctx.clone(), &outcome.events, Exec::Parallel).unwrap()
}

fn committee_pass(c: &mut Criterion) {
    let ctx = context();
    let engine = warmed_engine(&ctx);
    let mut group = c.benchmark_group("predict_all");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::new(name, ctx.len()), |b| {
            b.iter(|| engine.committee().predict_all(engine.functions(), ctx.len(), exec))
        });
    }
    group.finish();
}

fn slow_iteration(c: &mut Criterion) {
    let ctx = context();
    let engine = warmed_engine(&ctx);
    let snapshot = SlowSnapshot {
        annotations: engine.annotations().clone(),
        committee: engine.predictions().iter().map(|p| p.predicted).collect(),
        batch: engine.config().batch,
    };
    let tunable = &engine.functions()[dualmatch_core::labeling::InitialLf::ALL.len()..];
    let mut group = c.benchmark_group("slow_loop_iteration");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut slow = SlowLoop::new(engine.config().slow, engine.config().seed);
                slow.iterate(&ctx, &snapshot, tunable, exec)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, task_build, committee_pass, slow_iteration);
criterion_main!(benches);
