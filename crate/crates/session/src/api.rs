//! JSON endpoints. Pairs are addressed by their candidate index (`pairId`).

use std::collections::BTreeMap;

use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use dualmatch_core::ontology::ClassRecord;
use dualmatch_core::TaskContext;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::{Answer, IndicatorSample, Phase, Session, SessionSettings, SubmitReceipt};
use crate::state::{AppState, TaskSummary, TaskUpload};

/// Uploaded ontologies can be far larger than the default body limit.
const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/tasks", get(list_tasks).post(upload_task))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}/batch", get(get_batch))
        .route("/sessions/{id}/annotations", post(submit_annotations))
        .route("/sessions/{id}/stop", post(stop))
        .route("/sessions/{id}/predictions", get(predictions))
        .route("/sessions/{id}/verifications", post(submit_verifications))
        .route("/sessions/{id}/observations", get(list_observations).post(add_observation).delete(remove_observation))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/export", get(export))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Runs engine work off the async executor.
async fn blocking<R: Send + 'static>(f: impl FnOnce() -> Result<R> + Send + 'static) -> Result<R> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassView {
    pub iri: String,
    pub name: String,
    pub label: String,
    pub comment: String,
}

impl From<&ClassRecord> for ClassView {
    fn from(c: &ClassRecord) -> Self {
        ClassView { iri: c.iri.clone(), name: c.name.clone(), label: c.label.clone(), comment: c.comment.clone() }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairView {
    pub pair_id: usize,
    pub source: ClassView,
    pub target: ClassView,
    /// ŷ: the committee's label for the pair.
    pub predicted: bool,
    pub p: f64,
}

fn pair_view(ctx: &TaskContext, pair: usize, predicted: bool, p: f64) -> PairView {
    let cp = ctx.candidates.pairs[pair];
    PairView {
        pair_id: pair,
        source: ctx.source.schema.get(cp.source).into(),
        target: ctx.target.schema.get(cp.target).into(),
        predicted,
        p,
    }
}

async fn list_tasks(State(state): State<AppState>) -> Result<Json<Vec<TaskSummary>>> {
    Ok(Json(state.tasks()?))
}

async fn upload_task(
    State(state): State<AppState>,
    Json(upload): Json<TaskUpload>,
) -> Result<(StatusCode, Json<TaskSummary>)> {
    let summary = blocking(move || state.upload_task(upload)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    pub task_id: String,
    #[serde(default)]
    pub config: SessionSettings,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionCreated {
    pub session_id: String,
    pub phase: Phase,
    pub batch_token: Option<String>,
}

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreated>)> {
    let created = blocking(move || {
        let id = state.create_session(&req.task_id, &req.config)?;
        state.with_session(&id, |s| {
            Ok(SessionCreated { session_id: id.clone(), phase: s.phase(), batch_token: s.pending_token() })
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn list_sessions(State(state): State<AppState>) -> Result<Json<Vec<String>>> {
    Ok(Json(state.session_ids()?))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BatchView {
    pub batch_token: Option<String>,
    pub batch: usize,
    pub phase: Phase,
    pub pairs: Vec<PairView>,
}

async fn get_batch(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<BatchView>> {
    blocking(move || {
        state.with_session(&id, |s| {
            let batch = s.batch()?;
            let ctx = s.context().clone();
            Ok(Json(BatchView {
                batch_token: s.pending_token(),
                batch: batch.index,
                phase: s.phase(),
                pairs: batch.items.iter().map(|q| pair_view(&ctx, q.pair, q.predicted, q.p)).collect(),
            }))
        })
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnnotationRequest {
    pub batch_token: String,
    pub answers: BTreeMap<usize, Answer>,
}

async fn submit_annotations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<AnnotationRequest>,
) -> Result<Json<SubmitReceipt>> {
    blocking(move || state.with_session(&id, |s| s.submit(&req.batch_token, &req.answers).map(Json))).await
}

async fn stop(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StatusView>> {
    blocking(move || {
        state.with_session(&id, |s| {
            s.stop()?;
            Ok(Json(status_of(s)))
        })
    })
    .await
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictionsView {
    pub phase: Phase,
    pub predictions: Vec<PairView>,
}

async fn predictions(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<PredictionsView>> {
    blocking(move || {
        state.with_session(&id, |s| {
            let ctx = s.context().clone();
            let scores = s.engine().predictions();
            let predictions =
                s.predictions()?.into_iter().map(|pair| pair_view(&ctx, pair, true, scores[pair].p)).collect();
            Ok(Json(PredictionsView { phase: s.phase(), predictions }))
        })
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VerificationRequest {
    /// pairId -> accepted. Predictions left out count as rejected.
    pub decisions: BTreeMap<usize, bool>,
}

async fn submit_verifications(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<VerificationRequest>,
) -> Result<Json<ExportView>> {
    blocking(move || {
        state.with_session(&id, |s| {
            s.verify(&req.decisions)?;
            export_of(s).map(Json)
        })
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ObservationView {
    pub pair_id: usize,
    pub source: String,
    pub target: String,
    pub note: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ObservationList {
    /// Whether the request changed the list; `None` for plain reads.
    pub changed: Option<bool>,
    pub observations: Vec<ObservationView>,
}

fn observations_of(s: &Session, changed: Option<bool>) -> ObservationList {
    let ctx = s.context();
    let observations = s
        .observations()
        .iter()
        .map(|(&pair, note)| {
            let (source, target) = ctx.pair_iris(pair);
            ObservationView { pair_id: pair, source: source.into(), target: target.into(), note: note.clone() }
        })
        .collect();
    ObservationList { changed, observations }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ObservationRequest {
    pub pair_id: usize,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairQuery {
    pub pair_id: usize,
}

async fn list_observations(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ObservationList>> {
    state.with_session(&id, |s| Ok(Json(observations_of(s, None))))
}

async fn add_observation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ObservationRequest>,
) -> Result<Json<ObservationList>> {
    blocking(move || {
        state.with_session(&id, |s| {
            let changed = s.add_observation(req.pair_id, req.note)?;
            Ok(Json(observations_of(s, Some(changed))))
        })
    })
    .await
}

async fn remove_observation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PairQuery>,
) -> Result<Json<ObservationList>> {
    blocking(move || {
        state.with_session(&id, |s| {
            let changed = s.remove_observation(q.pair_id)?;
            Ok(Json(observations_of(s, Some(changed))))
        })
    })
    .await
}

/// Response times in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResponseTimeView {
    pub count: usize,
    pub mean_ms: f64,
    pub max_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusView {
    pub session_id: String,
    pub task_id: String,
    pub phase: Phase,
    pub annotated: usize,
    pub annotated_matches: usize,
    pub unlabeled: usize,
    pub budget: usize,
    pub batches_done: usize,
    pub pending_batch_token: Option<String>,
    pub observations: usize,
    pub stop_indicator_history: Vec<IndicatorSample>,
    pub response_time_stats: ResponseTimeView,
}

fn status_of(s: &Session) -> StatusView {
    let engine = s.engine();
    let stats = s.response_stats();
    StatusView {
        session_id: s.id().to_string(),
        task_id: s.header().task_id.clone(),
        phase: s.phase(),
        annotated: engine.annotations().len(),
        annotated_matches: engine.annotations().matches(),
        unlabeled: engine.unlabeled_count(),
        budget: engine.config().budget,
        batches_done: engine.batches_done(),
        pending_batch_token: s.pending_token(),
        observations: s.observations().len(),
        stop_indicator_history: s.stop_history(),
        response_time_stats: ResponseTimeView {
            count: stats.count,
            mean_ms: stats.mean * 1000.0,
            max_ms: stats.max * 1000.0,
            p95_ms: stats.p95 * 1000.0,
        },
    }
}

async fn status(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StatusView>> {
    state.with_session(&id, |s| Ok(Json(status_of(s))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SameAs {
    pub source: String,
    pub relation: &'static str,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExportView {
    pub session_id: String,
    pub task_id: String,
    pub matches: Vec<SameAs>,
}

fn export_of(s: &Session) -> Result<ExportView> {
    let ctx = s.context();
    let matches = s
        .final_matches()?
        .iter()
        .map(|&pair| {
            let (source, target) = ctx.pair_iris(pair);
            SameAs { source: source.into(), relation: "sameAs", target: target.into() }
        })
        .collect();
    Ok(ExportView { session_id: s.id().to_string(), task_id: s.header().task_id.clone(), matches })
}

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ExportView>> {
    state.with_session(&id, |s| export_of(s).map(Json))
}
