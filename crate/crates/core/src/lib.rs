//! Interactive ontology matching with a fast query loop over a weakly
//! supervised committee and a slow loop that tunes its labeling functions.

pub mod blocking;
pub mod committee;
pub mod context;
pub mod error;
pub mod exec;
pub mod fast_loop;
pub mod features;
pub mod harness;
pub mod labeling;
pub mod ontology;
pub mod slow_loop;
pub mod trace;

pub use committee::{CommitteeModel, EnsembleMode};
pub use context::{load_task_dir, TaskContext, TaskInputs};
pub use error::{Error, Result};
pub use exec::Exec;
pub use fast_loop::{run_fast_loop, Engine, FastLoopConfig, Scheduling, Strategy};
pub use ontology::{MatchTask, OntologySchema};
pub use trace::TraceEvent;
