//! Route handlers.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use dewat_mca::delphi::{
    DelphiConfig, DelphiSession, ExpertId, Rating, RatingItem, RoundSummary, SessionState, Side,
    SCALE_DESCRIPTIONS, SCALE_MAX, SCALE_MIN,
};
use dewat_mca::domain::{parse_performance_table, Criterion, PerformanceTable};
use dewat_mca::pipeline::{
    judgments_by_criterion, run_pipeline, InjectionDocument, PipelineOptions, PolicyKind,
    QualitativeInput, StudyResults, DEFAULT_ALPHA,
};
use dewat_mca::report::{sha256_hex, InputsEcho, ReportDocument, SourceEcho};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::store::{SessionRecord, Store, StudyRecord};

pub struct AppState {
    pub store: Store,
    pub facilitator_token: String,
}

type AppResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/studies", post(create_study))
        .route("/studies/{id}", get(get_study))
        .route("/studies/{id}/sessions", post(create_session))
        .route("/studies/{id}/run", post(run_study))
        .route("/studies/{id}/report", get(get_report))
        .route("/sessions/{id}/ratings", post(submit_ratings))
        .route("/sessions/{id}/close-round", post(close_round))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/summary", get(summary))
        .with_state(state)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn require_facilitator(state: &AppState, headers: &HeaderMap) -> AppResult<()> {
    match bearer(headers) {
        Some(t) if t == state.facilitator_token => Ok(()),
        _ => Err(ApiError::unauthorized()),
    }
}

/// JSON body parsing that reports schema problems as 400. An empty body
/// reads as `{}`.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> AppResult<T> {
    let bytes: &[u8] = if body.iter().all(|b| b.is_ascii_whitespace()) {
        b"{}"
    } else {
        body
    };
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

#[derive(Debug, Serialize)]
struct StudyView<'a> {
    id: &'a str,
    created: chrono::DateTime<Utc>,
    updated: chrono::DateTime<Utc>,
    dataset_sha256: &'a str,
    technologies: &'a [String],
    sessions: &'a [String],
    results: Option<&'a StudyResults>,
}

impl<'a> From<&'a StudyRecord> for StudyView<'a> {
    fn from(s: &'a StudyRecord) -> Self {
        StudyView {
            id: &s.id,
            created: s.created,
            updated: s.updated,
            dataset_sha256: &s.dataset_sha256,
            technologies: &s.technologies,
            sessions: &s.sessions,
            results: s.results.as_ref(),
        }
    }
}

async fn create_study(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> AppResult<Response> {
    require_facilitator(&state, &headers)?;
    let csv = String::from_utf8(body.to_vec())
        .map_err(|_| ApiError::bad_request("dataset must be UTF-8 CSV"))?;
    let table = parse_performance_table(&csv).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let now = Utc::now();
    let study = StudyRecord {
        id: new_id(),
        created: now,
        updated: now,
        dataset_sha256: sha256_hex(csv.as_bytes()),
        dataset_csv: csv,
        technologies: table.technologies().to_vec(),
        sessions: Vec::new(),
        results: None,
        report: None,
    };
    let view = serde_json::to_value(StudyView::from(&study)).map_err(ApiError::internal)?;
    state.store.insert_study(study).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_study(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> AppResult<Response> {
    require_facilitator(&state, &headers)?;
    let study = state
        .store
        .study(&id)
        .await
        .ok_or_else(|| ApiError::not_found("study", &id))?;
    let study = study.read().await;
    Ok(Json(StudyView::from(&*study)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    /// Panel member labels; each receives its own token.
    experts: Vec<String>,
    /// Qualitative criteria covered by the session; all of them when omitted.
    #[serde(default)]
    criteria: Option<Vec<u8>>,
    #[serde(default)]
    config: Option<DelphiConfig>,
}

#[derive(Debug, Serialize)]
struct ExpertToken {
    expert: String,
    token: String,
}

#[derive(Debug, Serialize)]
struct SessionCreated {
    session_id: String,
    study_id: String,
    state: SessionState,
    round: u32,
    items: Vec<RatingItem>,
    tokens: Vec<ExpertToken>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> AppResult<Response> {
    require_facilitator(&state, &headers)?;
    let req: CreateSession = parse_body(&body)?;
    let study = state
        .store
        .study(&id)
        .await
        .ok_or_else(|| ApiError::not_found("study", &id))?;
    let mut study = study.write().await;

    let criteria = req.criteria.unwrap_or_else(|| {
        Criterion::all()
            .iter()
            .filter(|c| c.is_qualitative())
            .map(|c| c.id)
            .collect()
    });
    let mut taken = Vec::new();
    for sid in &study.sessions {
        if let Some(existing) = state.store.session(sid).await {
            taken.extend(existing.read().await.session.criteria());
        }
    }
    if let Some(c) = criteria.iter().find(|c| taken.contains(c)) {
        return Err(ApiError::conflict(format!(
            "criterion {c} already has a session in this study"
        )));
    }

    let items = RatingItem::all_pairs(&study.technologies, &criteria);
    let experts: Vec<ExpertId> = req.experts.iter().cloned().map(ExpertId).collect();
    let session_id = new_id();
    let session = DelphiSession::create(
        session_id.clone(),
        experts.clone(),
        items.clone(),
        req.config.unwrap_or_default(),
    )?;
    let tokens: BTreeMap<String, ExpertId> =
        experts.iter().map(|e| (new_id(), e.clone())).collect();
    let mut issued: Vec<ExpertToken> = tokens
        .iter()
        .map(|(t, e)| ExpertToken {
            expert: e.0.clone(),
            token: t.clone(),
        })
        .collect();
    issued.sort_by_key(|t| req.experts.iter().position(|e| *e == t.expert));

    let now = Utc::now();
    let record = SessionRecord {
        id: session_id.clone(),
        study_id: study.id.clone(),
        created: now,
        updated: now,
        session,
        tokens,
    };
    state.store.insert_session(record).await?;

    let mut updated = study.clone();
    updated.sessions.push(session_id.clone());
    updated.updated = now;
    state.store.save_study(&updated)?;
    *study = updated;

    let body = SessionCreated {
        session_id,
        study_id: study.id.clone(),
        state: SessionState::Collecting,
        round: 1,
        items,
        tokens: issued,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingInput {
    criterion_id: u8,
    tech_a: String,
    tech_b: String,
    value: i64,
    #[serde(default)]
    worse: Side,
    #[serde(default)]
    justification: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitRatings {
    ratings: Vec<RatingInput>,
}

#[derive(Debug, Serialize)]
struct RatingsAccepted {
    round: u32,
    accepted: usize,
    replaced: usize,
    /// Items this expert has not rated in the open round.
    remaining: usize,
}

fn scale_error(value: i64) -> ApiError {
    let scale = SCALE_DESCRIPTIONS
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{} = {d}", i + 1))
        .collect::<Vec<_>>()
        .join(", ");
    ApiError::bad_request(format!(
        "rating value {value} is outside the {SCALE_MIN}..{SCALE_MAX} scale ({scale})"
    ))
}

async fn submit_ratings(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> AppResult<Response> {
    let session = state
        .store
        .session(&id)
        .await
        .ok_or_else(|| ApiError::not_found("session", &id))?;
    let token = bearer(&headers).ok_or_else(ApiError::unauthorized)?;
    let req: SubmitRatings = parse_body(&body)?;
    if req.ratings.is_empty() {
        return Err(ApiError::bad_request("no ratings submitted"));
    }
    let mut record = session.write().await;
    let expert = record
        .tokens
        .get(token)
        .cloned()
        .ok_or_else(ApiError::unauthorized)?;

    // Applied to a copy so a bad rating leaves the batch unapplied.
    let mut updated = record.clone();
    let mut replaced = 0;
    for r in req.ratings {
        let value = u8::try_from(r.value)
            .ok()
            .filter(|v| (SCALE_MIN..=SCALE_MAX).contains(v))
            .ok_or_else(|| scale_error(r.value))?;
        let ack = updated.session.submit_rating(Rating {
            expert: expert.clone(),
            item: RatingItem::new(r.criterion_id, r.tech_a, r.tech_b),
            value,
            worse: r.worse,
            justification: r.justification,
        })?;
        if ack.replaced_previous {
            replaced += 1;
        }
    }
    updated.updated = Utc::now();
    let own = updated.session.own_ratings(&expert)?;
    let body = RatingsAccepted {
        round: updated.session.round(),
        accepted: own.iter().filter(|r| r.is_some()).count(),
        replaced,
        remaining: own.iter().filter(|r| r.is_none()).count(),
    };
    state.store.save_session(&updated)?;
    *record = updated;
    Ok(Json(body).into_response())
}

async fn close_round(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> AppResult<Response> {
    require_facilitator(&state, &headers)?;
    let session = state
        .store
        .session(&id)
        .await
        .ok_or_else(|| ApiError::not_found("session", &id))?;
    let mut record = session.write().await;
    let mut updated = record.clone();
    let summary = updated.session.close_round()?;
    updated.updated = Utc::now();
    state.store.save_session(&updated)?;
    *record = updated;
    Ok(Json(summary).into_response())
}

#[derive(Debug, Serialize)]
struct Advanced {
    state: SessionState,
    round: u32,
}

async fn advance(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> AppResult<Response> {
    require_facilitator(&state, &headers)?;
    let session = state
        .store
        .session(&id)
        .await
        .ok_or_else(|| ApiError::not_found("session", &id))?;
    let mut record = session.write().await;
    let mut updated = record.clone();
    let new_state = updated.session.advance()?;
    updated.updated = Utc::now();
    state.store.save_session(&updated)?;
    *record = updated;
    Ok(Json(Advanced {
        state: new_state,
        round: record.session.round(),
    })
    .into_response())
}

#[derive(Debug, Serialize)]
struct OwnRating {
    value: u8,
    worse: Side,
}

/// Aggregate view of a session. Individual ratings appear only in `mine`,
/// and only for the expert presenting their own token.
#[derive(Debug, Serialize)]
struct SessionSummary<'a> {
    session_id: &'a str,
    study_id: &'a str,
    state: SessionState,
    round: u32,
    items: &'a [RatingItem],
    panel_size: usize,
    pending: usize,
    history: &'a [RoundSummary],
    scale: [&'static str; 5],
    #[serde(skip_serializing_if = "Option::is_none")]
    mine: Option<Vec<Option<OwnRating>>>,
}

async fn summary(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> AppResult<Response> {
    let session = state
        .store
        .session(&id)
        .await
        .ok_or_else(|| ApiError::not_found("session", &id))?;
    let record = session.read().await;
    let token = bearer(&headers).ok_or_else(ApiError::unauthorized)?;
    let mine = if token == state.facilitator_token {
        None
    } else {
        let expert = record
            .tokens
            .get(token)
            .ok_or_else(ApiError::unauthorized)?;
        Some(
            record
                .session
                .own_ratings(expert)?
                .into_iter()
                .map(|r| r.map(|(value, worse)| OwnRating { value, worse }))
                .collect(),
        )
    };
    let s = &record.session;
    Ok(Json(SessionSummary {
        session_id: &record.id,
        study_id: &record.study_id,
        state: s.state(),
        round: s.round(),
        items: s.items(),
        panel_size: s.experts().len(),
        pending: s.pending(),
        history: s.history(),
        scale: SCALE_DESCRIPTIONS,
        mine,
    })
    .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunRequest {
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    policy: PolicyKind,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    allow_inconsistent: bool,
    /// Given priority columns and missing-cell values.
    #[serde(default)]
    inject: Option<InjectionDocument>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn run_study(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> AppResult<Response> {
    require_facilitator(&state, &headers)?;
    let req: RunRequest = parse_body(&body)?;
    let study = state
        .store
        .study(&id)
        .await
        .ok_or_else(|| ApiError::not_found("study", &id))?;
    let mut study = study.write().await;
    let table: PerformanceTable =
        parse_performance_table(&study.dataset_csv).map_err(ApiError::internal)?;

    let mut sources = vec![SourceEcho::new(
        "dataset",
        None,
        study.dataset_csv.as_bytes(),
    )];
    let mut judgments = Vec::new();
    for sid in &study.sessions {
        let session =
            state.store.session(sid).await.ok_or_else(|| {
                ApiError::internal(format!("study {} lost session {sid}", study.id))
            })?;
        let record = session.read().await;
        if !record.session.state().is_terminal() {
            return Err(ApiError::conflict(format!(
                "session {sid} is {:?} in round {}; it must converge or exhaust before the run",
                record.session.state(),
                record.session.round()
            )));
        }
        let export = record.session.export_consensus()?;
        let bytes = serde_json::to_vec(&export).map_err(ApiError::internal)?;
        sources.push(SourceEcho::new("session", Some(sid), &bytes));
        judgments.extend(export.judgments);
    }
    let mut qualitative = judgments_by_criterion(judgments);
    let mut injections = BTreeMap::new();
    if let Some(doc) = req.inject {
        let bytes = serde_json::to_vec(&doc).map_err(ApiError::internal)?;
        sources.push(SourceEcho::new("inject", None, &bytes));
        for (criterion, column) in doc.qualitative {
            if qualitative.contains_key(&criterion) {
                return Err(ApiError::bad_request(format!(
                    "criterion {criterion} has both a session and an injected priority column"
                )));
            }
            qualitative.insert(criterion, QualitativeInput::Priorities(column));
        }
        injections = doc.missing_cells;
    }

    let options = PipelineOptions {
        weights: req.weights,
        policy: req.policy,
        injections,
        alpha: req.alpha,
        allow_inconsistent: req.allow_inconsistent,
    };
    let results = run_pipeline(&table, &qualitative, &options)?;
    let report = ReportDocument::build(InputsEcho { sources, options }, &results);
    let body = report.to_json();

    let mut updated = study.clone();
    updated.results = Some(results);
    updated.report = Some(report);
    updated.updated = Utc::now();
    state.store.save_study(&updated)?;
    *study = updated;
    Ok(json_response(StatusCode::OK, body))
}

async fn get_report(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> AppResult<Response> {
    require_facilitator(&state, &headers)?;
    let study = state
        .store
        .study(&id)
        .await
        .ok_or_else(|| ApiError::not_found("study", &id))?;
    let study = study.read().await;
    let report = study
        .report
        .as_ref()
        .ok_or_else(|| ApiError::conflict("the pipeline has not run for this study"))?;
    Ok(json_response(StatusCode::OK, report.to_json()))
}
