//! Simulated annotators, evaluation curves, synthetic tasks and the
//! benchmark runner.

pub mod bench;
pub mod eval;
pub mod oracle;
pub mod synthetic;

pub use bench::{run_benchmark, write_bench_report, BenchConfig, BenchResult, BenchTask, Variant};
pub use eval::{evaluate_trace, EvaluationReport};
pub use oracle::{FnOracle, Oracle, SimulatedOracle};
pub use synthetic::{generate_synthetic_task, SyntheticSpec, SyntheticTask};
