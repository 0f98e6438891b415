//! HTTP/JSON service over the scenario API.
//!
//! Readers take a snapshot (`Arc<Scenario>`) and evaluate without holding the
//! lock. Writers build the replacement scenario under the write lock and swap
//! it in whole, so every request sees either the old or the new scenario.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use reflexive_conflict::api::{
    apply_series_upload, handle_evaluate, handle_evaluate_series, handle_whatif, ApiError, EvaluationRequest,
    Scenario, SeriesUpload, WhatIfRequest,
};
use reflexive_conflict::{Evaluator, GoalGraph};

#[derive(Debug, Default)]
pub struct AppState {
    scenario: RwLock<Option<Arc<Scenario>>>,
}

impl AppState {
    pub fn new(scenario: Option<Scenario>) -> Self {
        Self {
            scenario: RwLock::new(scenario.map(Arc::new)),
        }
    }

    pub fn snapshot(&self) -> Option<Arc<Scenario>> {
        self.scenario.read().expect("scenario lock").clone()
    }

    /// Replaces the scenario with `f(current)`; on error nothing changes.
    fn update<F>(&self, f: F) -> Result<Arc<Scenario>, ApiError>
    where
        F: FnOnce(Option<&Scenario>) -> Result<Scenario, ApiError>,
    {
        let mut guard = self.scenario.write().expect("scenario lock");
        let next = Arc::new(f(guard.as_deref())?);
        *guard = Some(next.clone());
        Ok(next)
    }
}

struct ApiFailure(ApiError);

impl From<ApiError> for ApiFailure {
    fn from(e: ApiError) -> Self {
        ApiFailure(e)
    }
}

impl IntoResponse for ApiFailure {
    fn into_response(self) -> Response {
        let (status, body) = match &self.0 {
            ApiError::NoScenario => (StatusCode::CONFLICT, json!({ "error": self.0.to_string() })),
            ApiError::BadRequest(msg) => (StatusCode::BAD_REQUEST, json!({ "error": msg })),
            ApiError::Invalid(report) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "invalid knowledge base", "findings": report.findings }),
            ),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiFailure>;

async fn get_kb(State(state): State<Arc<AppState>>) -> ApiResult<GoalGraph> {
    let s = state.snapshot().ok_or(ApiError::NoScenario)?;
    Ok(Json(s.kb.clone()))
}

async fn put_kb(State(state): State<Arc<AppState>>, Json(kb): Json<GoalGraph>) -> ApiResult<GoalGraph> {
    let next = state.update(|current| match current {
        Some(s) => s.with_kb(kb),
        None => {
            Evaluator::new(&kb)?;
            Ok(Scenario::new(kb))
        }
    })?;
    Ok(Json(next.kb.clone()))
}

async fn evaluate(
    State(state): State<Arc<AppState>>,
    Json(req): Json<EvaluationRequest>,
) -> ApiResult<reflexive_conflict::api::EvaluationResponse> {
    let s = state.snapshot();
    Ok(Json(handle_evaluate(s.as_deref(), &req)?))
}

async fn whatif(
    State(state): State<Arc<AppState>>,
    Json(req): Json<WhatIfRequest>,
) -> ApiResult<reflexive_conflict::api::WhatIfResponse> {
    let s = state.snapshot();
    Ok(Json(handle_whatif(s.as_deref(), &req)?))
}

async fn get_series(
    State(state): State<Arc<AppState>>,
) -> ApiResult<std::collections::BTreeMap<String, reflexive_conflict::Series>> {
    let s = state.snapshot().ok_or(ApiError::NoScenario)?;
    Ok(Json(s.series.clone()))
}

async fn post_series(
    State(state): State<Arc<AppState>>,
    Json(upload): Json<SeriesUpload>,
) -> ApiResult<std::collections::BTreeMap<String, reflexive_conflict::Series>> {
    let next = state.update(|current| apply_series_upload(current.ok_or(ApiError::NoScenario)?, &upload))?;
    Ok(Json(next.series.clone()))
}

async fn evaluate_series(
    State(state): State<Arc<AppState>>,
) -> ApiResult<reflexive_conflict::pattern::SeriesEvaluation> {
    let s = state.snapshot();
    Ok(Json(handle_evaluate_series(s.as_deref())?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/kb", get(get_kb).put(put_kb))
        .route("/api/evaluate", post(evaluate))
        .route("/api/whatif", post(whatif))
        .route("/api/series", get(get_series).post(post_series))
        .route("/api/evaluate/series", get(evaluate_series))
        .with_state(state)
}

pub async fn serve(port: u16, scenario: Option<Scenario>) -> std::io::Result<()> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(scenario)))).await
}
