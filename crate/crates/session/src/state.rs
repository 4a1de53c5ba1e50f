//! Task registry and session table shared by all requests.
//!
//! With a data directory the layout is
//! `tasks/<name>/{source,target,alignment,synonyms}.json` and
//! `sessions/<id>/{header.json,trace.jsonl}`; both are reloaded on start.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use dualmatch_core::context::{ALIGNMENT_FILE, SOURCE_FILE, SYNONYMS_FILE, TARGET_FILE};
use dualmatch_core::features::Providers;
use dualmatch_core::labeling::SynonymLexicon;
use dualmatch_core::ontology::{load_alignment, parse_ontology, MatchTask};
use dualmatch_core::{load_task_dir, Exec, TaskContext};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::{Session, SessionHeader, SessionSettings};

/// Request body of `POST /tasks`: the documents of a task directory, inline.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TaskUpload {
    pub source: serde_json::Value,
    pub target: serde_json::Value,
    #[serde(default)]
    pub alignment: Option<serde_json::Value>,
    #[serde(default)]
    pub synonyms: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskSummary {
    pub task_id: String,
    pub source_classes: usize,
    pub target_classes: usize,
    pub candidates: usize,
    pub has_alignment: bool,
    pub blocking_recall: Option<f64>,
}

fn summarize(ctx: &TaskContext) -> TaskSummary {
    TaskSummary {
        task_id: ctx.task_id.clone(),
        source_classes: ctx.source.schema.len(),
        target_classes: ctx.target.schema.len(),
        candidates: ctx.len(),
        has_alignment: ctx.truth.is_some(),
        blocking_recall: ctx.blocking.recall,
    }
}

/// Cheap to clone; all clones share one registry.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Default)]
struct Inner {
    tasks: RwLock<BTreeMap<String, Arc<TaskContext>>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
    data_dir: Option<PathBuf>,
}

fn poisoned<T>(_: T) -> ServiceError {
    ServiceError::Internal("lock poisoned".into())
}

/// Directory-safe form of a task id.
fn dir_name(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

impl AppState {
    /// State that lives only as long as the process.
    pub fn in_memory() -> Self {
        AppState::default()
    }

    /// State persisted under `dir`, reloading whatever is already there.
    /// Sessions whose task is gone or whose trace no longer replays are
    /// skipped with a warning.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("tasks"))?;
        fs::create_dir_all(dir.join("sessions"))?;
        let state = AppState { inner: Arc::new(Inner { data_dir: Some(dir.to_path_buf()), ..Default::default() }) };
        for entry in sorted_dirs(&dir.join("tasks"))? {
            let ctx = TaskContext::from_inputs(load_task_dir(&entry)?, Exec::default())?;
            state.insert_task(ctx)?;
        }
        let mut highest = 0;
        for entry in sorted_dirs(&dir.join("sessions"))? {
            let restored = Session::read_header(&entry).and_then(|header| {
                let ctx = state.task(&header.task_id)?;
                Session::restore(&entry, header, ctx)
            });
            match restored {
                Ok(session) => {
                    let id = session.id().to_string();
                    highest = highest.max(id.trim_start_matches('s').parse::<u64>().unwrap_or(0));
                    state.inner.sessions.write().map_err(poisoned)?.insert(id, Arc::new(Mutex::new(session)));
                }
                Err(e) => log::warn!("skipping session {}: {e}", entry.display()),
            }
        }
        state.inner.next_session.store(highest, Ordering::SeqCst);
        Ok(state)
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.inner.data_dir.as_deref()
    }

    fn insert_task(&self, ctx: TaskContext) -> Result<TaskSummary> {
        let mut tasks = self.inner.tasks.write().map_err(poisoned)?;
        if tasks.contains_key(&ctx.task_id) {
            return Err(ServiceError::Conflict(format!("task `{}` already exists", ctx.task_id)));
        }
        let summary = summarize(&ctx);
        tasks.insert(ctx.task_id.clone(), Arc::new(ctx));
        Ok(summary)
    }

    /// Registers an already blocked task without persisting it.
    pub fn add_task(&self, ctx: TaskContext) -> Result<TaskSummary> {
        self.insert_task(ctx)
    }

    /// Parses, blocks and registers an uploaded task, writing its documents
    /// to the data directory if there is one.
    pub fn upload_task(&self, upload: TaskUpload) -> Result<TaskSummary> {
        let source = parse_ontology(&upload.source.to_string())?.schema;
        let target = parse_ontology(&upload.target.to_string())?.schema;
        let truth = match &upload.alignment {
            Some(doc) => Some(load_alignment(&doc.to_string(), &source, &target)?.0),
            None => None,
        };
        let lexicon = upload.synonyms.as_ref().map(|doc| SynonymLexicon::parse(&doc.to_string())).transpose()?;
        let task = MatchTask::new(source, target, truth)?;
        if self.inner.tasks.read().map_err(poisoned)?.contains_key(&task.id()) {
            return Err(ServiceError::Conflict(format!("task `{}` already exists", task.id())));
        }
        let ctx = TaskContext::build(task, lexicon, &Providers::builtin(), Exec::default())?;
        if let Some(root) = self.data_dir() {
            let dir = root.join("tasks").join(dir_name(&ctx.task_id));
            fs::create_dir_all(&dir)?;
            let docs = [
                (SOURCE_FILE, Some(&upload.source)),
                (TARGET_FILE, Some(&upload.target)),
                (ALIGNMENT_FILE, upload.alignment.as_ref()),
                (SYNONYMS_FILE, upload.synonyms.as_ref()),
            ];
            for (name, doc) in docs {
                if let Some(doc) = doc {
                    fs::write(dir.join(name), serde_json::to_vec_pretty(doc).expect("json value serializes"))?;
                }
            }
        }
        self.insert_task(ctx)
    }

    pub fn tasks(&self) -> Result<Vec<TaskSummary>> {
        Ok(self.inner.tasks.read().map_err(poisoned)?.values().map(|ctx| summarize(ctx)).collect())
    }

    pub fn task(&self, id: &str) -> Result<Arc<TaskContext>> {
        self.inner
            .tasks
            .read()
            .map_err(poisoned)?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown task `{id}`")))
    }

    pub fn create_session(&self, task_id: &str, settings: &SessionSettings) -> Result<String> {
        let ctx = self.task(task_id)?;
        let config = settings.resolve(ctx.len());
        let id = format!("s{}", self.inner.next_session.fetch_add(1, Ordering::SeqCst) + 1);
        let header = SessionHeader {
            session_id: id.clone(),
            task_id: task_id.to_string(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let dir = self.data_dir().map(|root| root.join("sessions").join(&id));
        let session = Session::create(header, ctx, config, dir.as_deref())?;
        self.inner.sessions.write().map_err(poisoned)?.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.inner
            .sessions
            .read()
            .map_err(poisoned)?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session `{id}`")))
    }

    pub fn session_ids(&self) -> Result<Vec<String>> {
        Ok(self.inner.sessions.read().map_err(poisoned)?.keys().cloned().collect())
    }

    /// Runs `f` with exclusive access to one session.
    pub fn with_session<R>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<R>) -> Result<R> {
        let session = self.session(id)?;
        let mut guard = session.lock().map_err(poisoned)?;
        f(&mut guard)
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}
