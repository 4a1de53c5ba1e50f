use std::fs;
use std::sync::Arc;
use std::time::Duration;

use dualmatch_core::features::Providers;
use dualmatch_core::harness::bench::{BenchConfig, BenchTask, Variant};
use dualmatch_core::harness::{
    evaluate_trace, generate_synthetic_task, run_benchmark, write_bench_report, FnOracle, SimulatedOracle,
    SyntheticSpec,
};
use dualmatch_core::ontology::{serialize_alignment, serialize_ontology};
use dualmatch_core::trace::{read_trace, trace_to_string};
use dualmatch_core::{
    load_task_dir, run_fast_loop, Engine, Error, Exec, FastLoopConfig, Scheduling, TaskContext, TraceEvent,
};

fn spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec { seed, n_source: 30, n_target: 40, match_rate: 0.03, noise: 0.5, rename: 0.2 }
}

fn context(seed: u64) -> Arc<TaskContext> {
    let s = generate_synthetic_task(&spec(seed)).unwrap();
    Arc::new(TaskContext::build(s.task, Some(s.lexicon), &Providers::builtin(), Exec::Parallel).unwrap())
}

fn config(budget: usize) -> FastLoopConfig {
    FastLoopConfig { batch: 5, budget, ..Default::default() }
}

#[test]
fn replay_rebuilds_the_engine_state() {
    let ctx = context(1);
    let mut oracle = SimulatedOracle::new(&ctx).unwrap();
    let outcome = run_fast_loop(ctx.clone(), &mut oracle, config(80)).unwrap();
    assert!(outcome.events.iter().any(|e| matches!(e, TraceEvent::Publication(_))), "slow loop never published");

    let replayed = Engine::replay(ctx.clone(), &outcome.events, Exec::Sequential).unwrap();
    assert_eq!(replayed.annotations().entries(), outcome.annotations.entries());
    assert_eq!(replayed.final_prediction().unwrap(), outcome.final_prediction.as_slice());
    assert_eq!(replayed.events(), outcome.events.as_slice());

    // Replaying a prefix and continuing produces the same run.
    let cut = outcome.events.iter().position(|e| matches!(e, TraceEvent::Query { batch: 9, .. })).unwrap();
    let mut resumed = Engine::replay(ctx.clone(), &outcome.events[..=cut], Exec::Parallel).unwrap();
    let truth = ctx.truth_mask();
    loop {
        let batch = resumed.next_batch();
        if batch.items.is_empty() {
            break;
        }
        let answers: Vec<(usize, bool)> = batch.pairs().into_iter().map(|p| (p, truth[p])).collect();
        resumed.submit(&answers).unwrap();
    }
    resumed.finish();
    assert_eq!(trace_to_string(resumed.events()), trace_to_string(&outcome.events));
}

#[test]
fn replay_rejects_a_diverging_trace() {
    let ctx = context(2);
    let mut oracle = SimulatedOracle::new(&ctx).unwrap();
    let mut events = run_fast_loop(ctx.clone(), &mut oracle, config(20)).unwrap().events;
    let query = events.iter_mut().find(|e| matches!(e, TraceEvent::Query { batch: 2, .. })).unwrap();
    let TraceEvent::Query { pairs, .. } = query else { unreachable!() };
    pairs.reverse();
    pairs[0].pair = (pairs[0].pair + 1) % ctx.len();
    assert!(matches!(Engine::replay(ctx, &events, Exec::Parallel), Err(Error::Trace(_))));
}

#[test]
fn execution_policy_does_not_change_the_trace() {
    let ctx = context(3);
    let run = |exec| {
        let mut oracle = SimulatedOracle::new(&ctx).unwrap();
        let outcome = run_fast_loop(ctx.clone(), &mut oracle, FastLoopConfig { exec, ..config(60) }).unwrap();
        trace_to_string(&outcome.events)
    };
    assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
}

#[test]
fn concurrent_runs_publish_and_replay() {
    let ctx = context(4);
    let mut oracle = SimulatedOracle::new(&ctx).unwrap().with_think_time(Duration::from_millis(20));
    let config = FastLoopConfig { scheduling: Scheduling::Concurrent, ..config(60) };
    let outcome = run_fast_loop(ctx.clone(), &mut oracle, config).unwrap();
    let publications = outcome.events.iter().filter(|e| matches!(e, TraceEvent::Publication(_))).count();
    let timings = outcome.events.iter().filter(|e| matches!(e, TraceEvent::Timing { .. })).count();
    assert!(publications > 0);
    assert_eq!(timings, 60 / 5 - 1);
    for e in &outcome.events {
        if let TraceEvent::Publication(p) = e {
            assert!(p.adopted_at >= p.snapshot_at);
        }
    }
    let report = evaluate_trace(&outcome.events).unwrap();
    assert_eq!(report.publications, publications);
    assert_eq!(report.response.count, timings);

    let replayed = Engine::replay(ctx, &outcome.events, Exec::Parallel).unwrap();
    assert_eq!(replayed.annotations().entries(), outcome.annotations.entries());
    assert_eq!(replayed.final_prediction().unwrap(), outcome.final_prediction.as_slice());
}

#[test]
fn oracle_failure_aborts_and_keeps_the_partial_trace() {
    let ctx = context(5);
    let mut asked = 0;
    let mut oracle = FnOracle(|_| {
        asked += 1;
        if asked > 12 {
            Err(Error::Oracle("annotator went home".into()))
        } else {
            Ok(false)
        }
    });
    let outcome = run_fast_loop(ctx, &mut oracle, config(50)).unwrap();
    assert_eq!(outcome.aborted.as_deref(), Some("oracle failure: annotator went home"));
    assert_eq!(outcome.annotations.len(), 10);
    assert!(matches!(outcome.events.last(), Some(TraceEvent::Aborted { annotated: 10, .. })));
    assert!(!outcome.events.iter().any(|e| matches!(e, TraceEvent::Final { .. })));
    let report = evaluate_trace(&outcome.events).unwrap();
    assert_eq!(report.annotated, 10);
    assert!(report.final_cost.is_none());
    assert!(report.aborted.is_some());
}

#[test]
fn simulated_oracle_needs_a_reference_alignment() {
    let s = generate_synthetic_task(&spec(6)).unwrap();
    let mut task = s.task;
    task.truth = None;
    let ctx = TaskContext::build(task, None, &Providers::builtin(), Exec::Parallel).unwrap();
    assert!(matches!(SimulatedOracle::new(&ctx), Err(Error::Oracle(_))));
}

#[test]
fn task_directory_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let s = generate_synthetic_task(&spec(7)).unwrap();
    let truth = s.task.truth.clone().unwrap();
    fs::write(tmp.path().join("source.json"), serialize_ontology(&s.task.source)).unwrap();
    fs::write(tmp.path().join("target.json"), serialize_ontology(&s.task.target)).unwrap();
    fs::write(tmp.path().join("alignment.json"), serialize_alignment(truth.pairs.iter().cloned())).unwrap();
    fs::write(tmp.path().join("synonyms.json"), r#"{"paper": ["article", "manuscript"]}"#).unwrap();

    let inputs = load_task_dir(tmp.path()).unwrap();
    assert_eq!(inputs.task.truth.as_ref(), Some(&truth));
    assert!(inputs.lexicon.is_some());
    let loaded = TaskContext::from_inputs(inputs, Exec::Parallel).unwrap();
    let direct = TaskContext::build(s.task, loaded.lexicon.clone(), &Providers::builtin(), Exec::Parallel).unwrap();
    assert_eq!(loaded.task_id, direct.task_id);
    assert_eq!(loaded.candidates, direct.candidates);
    assert_eq!(loaded.truth_indices, direct.truth_indices);
    assert_eq!(loaded.blocking, direct.blocking);

    fs::remove_file(tmp.path().join("target.json")).unwrap();
    let err = load_task_dir(tmp.path()).unwrap_err();
    assert!(err.to_string().contains("target.json"));
}

#[test]
fn bench_report_matches_its_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = BenchConfig {
        tasks: vec![BenchTask::Synthetic {
            name: "toy".into(),
            n_source: 25,
            n_target: 30,
            match_rate: 0.04,
            noise: 0.5,
            rename: 0.0,
            seed_offset: 3,
        }],
        variants: vec![Variant::Dualloop, Variant::NoSlowLoop],
        seeds: vec![0, 1, 2],
        batch: 5,
        budget_fraction: 0.4,
        ..Default::default()
    };
    let result = run_benchmark(&config, Exec::Parallel).unwrap();
    assert_eq!(result.runs.len(), 6);
    assert!(result.summary.failures.is_empty());
    write_bench_report(tmp.path(), &result).unwrap();

    for run in &result.runs {
        let stem = run.file_stem();
        let text = fs::read_to_string(tmp.path().join("traces").join(format!("{stem}.jsonl"))).unwrap();
        let events = read_trace(text.as_bytes()).unwrap();
        assert_eq!(events, run.events);
        let slow = events.iter().any(|e| matches!(e, TraceEvent::Publication(_)));
        assert_eq!(slow, run.variant == Variant::Dualloop, "{stem}");
        let csv = fs::read_to_string(tmp.path().join("curves").join(format!("{stem}_f1.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + run.report.as_ref().unwrap().f1_curve.len());
    }

    // Summary means recomputed from the per-run reports.
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    for (i, variant) in config.variants.iter().enumerate() {
        let finals: Vec<f64> = result
            .runs
            .iter()
            .filter(|r| r.variant == *variant)
            .map(|r| r.report.as_ref().unwrap().final_recall.unwrap())
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let reported = summary["variants"][i]["final_recall"]["mean"].as_f64().unwrap();
        assert!((reported - mean).abs() < 1e-12, "{variant:?}: {reported} vs {mean}");
    }
}
