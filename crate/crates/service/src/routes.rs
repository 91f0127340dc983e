//! HTTP routes. Session handlers take the session lock, then run the
//! pipeline step on the blocking pool.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use lakefuse_core::table::HeaderMode;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::app::{App, DEFAULT_PREVIEW_ROWS};
use crate::error::{ApiError, ServiceError};
use crate::session::Stage;

type Reply<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &str, stage: Option<Stage>) -> Result<T, ApiError> {
    let text = if body.trim().is_empty() { "{}" } else { body };
    serde_json::from_str(text).map_err(|e| ServiceError::BadRequest(format!("invalid request body: {e}")).at(stage))
}

async fn blocking<T, F>(app: Arc<App>, stage: Option<Stage>, f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce(&App) -> crate::error::Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&app))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()).at(stage))?
        .map(Json)
        .map_err(|e| e.at(stage))
}

/// Run `f` with the session locked.
async fn locked<T, F>(app: Arc<App>, id: String, stage: Option<Stage>, f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce(&App, &str) -> crate::error::Result<T> + Send + 'static,
{
    let _guard = app.store().lock(&id).await.map_err(|e| e.at(stage))?;
    blocking(app, stage, move |app| f(app, &id)).await
}

async fn create_session(State(app): State<Arc<App>>) -> Result<(StatusCode, Json<crate::session::SessionState>), ApiError> {
    let Json(state) = blocking(app, None, |app| app.create_session()).await?;
    Ok((StatusCode::CREATED, Json(state)))
}

async fn get_session(State(app): State<Arc<App>>, Path(id): Path<String>) -> Reply<crate::session::SessionState> {
    locked(app, id, None, |app, id| app.session(id)).await
}

#[derive(Debug, Default, Deserialize)]
struct QueryTableParams {
    name: Option<String>,
    header: Option<HeaderMode>,
}

async fn post_query_table(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Query(params): Query<QueryTableParams>,
    headers: HeaderMap,
    body: String,
) -> Reply<crate::app::QueryView> {
    let stage = Some(Stage::Discover);
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    if is_json {
        let mut req: crate::app::GenerateRequest = parse(&body, stage)?;
        if req.name.is_none() {
            req.name = params.name;
        }
        locked(app, id, stage, move |app, id| app.generate_query(id, &req)).await
    } else {
        let header = params.header.unwrap_or_default();
        locked(app, id, stage, move |app, id| app.upload_query(id, params.name.as_deref(), header, &body)).await
    }
}

async fn get_query_table(State(app): State<Arc<App>>, Path(id): Path<String>) -> Reply<crate::app::QueryView> {
    locked(app, id, Some(Stage::Discover), |app, id| app.query_view(id)).await
}

async fn discover(State(app): State<Arc<App>>, Path(id): Path<String>, body: String) -> Reply<crate::app::DiscoverResponse> {
    let stage = Some(Stage::Discover);
    let req: crate::app::DiscoverBody = parse(&body, stage)?;
    locked(app, id, stage, move |app, id| app.discover(id, &req)).await
}

async fn selection(State(app): State<Arc<App>>, Path(id): Path<String>, body: String) -> Reply<crate::app::SelectionResponse> {
    let stage = Some(Stage::Discover);
    let req: crate::app::SelectionBody = parse(&body, stage)?;
    locked(app, id, stage, move |app, id| app.select(id, &req)).await
}

async fn align(State(app): State<Arc<App>>, Path(id): Path<String>, body: String) -> Reply<crate::session::MappingInfo> {
    let stage = Some(Stage::Align);
    let req: crate::app::AlignBody = parse(&body, stage)?;
    locked(app, id, stage, move |app, id| app.align(id, &req)).await
}

async fn put_mapping(State(app): State<Arc<App>>, Path(id): Path<String>, body: String) -> Reply<crate::session::MappingInfo> {
    locked(app, id, Some(Stage::Align), move |app, id| app.put_mapping(id, &body)).await
}

async fn get_mapping(State(app): State<Arc<App>>, Path(id): Path<String>) -> Reply<crate::session::MappingInfo> {
    let stage = Some(Stage::Align);
    locked(app, id, stage, |app, id| {
        app.session(id)?
            .mapping
            .ok_or_else(|| ServiceError::OutOfOrder("no mapping yet: align first".into()))
    })
    .await
}

async fn integrate(State(app): State<Arc<App>>, Path(id): Path<String>, body: String) -> Reply<crate::app::IntegrationView> {
    let stage = Some(Stage::Integrate);
    let req: crate::app::IntegrateBody = parse(&body, stage)?;
    locked(app, id, stage, move |app, id| app.integrate(id, &req)).await
}

async fn get_integration(
    State(app): State<Arc<App>>,
    Path((id, operator)): Path<(String, String)>,
) -> Reply<crate::app::IntegrationView> {
    locked(app, id, Some(Stage::Integrate), move |app, id| app.integration(id, &operator)).await
}

async fn analyze(State(app): State<Arc<App>>, Path(id): Path<String>, body: String) -> Reply<crate::session::AnalysisRecord> {
    let stage = Some(Stage::Analyze);
    let req: crate::app::AnalyzeBody = parse(&body, stage)?;
    locked(app, id, stage, move |app, id| app.analyze(id, &req)).await
}

async fn reset(State(app): State<Arc<App>>, Path(id): Path<String>, body: String) -> Reply<crate::session::SessionState> {
    let req: crate::app::ResetBody = parse(&body, None)?;
    let stage = Some(req.stage);
    locked(app, id, stage, move |app, id| app.reset(id, &req)).await
}

async fn methods(State(app): State<Arc<App>>) -> Json<BTreeMap<&'static str, Vec<String>>> {
    Json(BTreeMap::from([("methods", app.method_names())]))
}

async fn operators(State(app): State<Arc<App>>) -> Json<BTreeMap<&'static str, Vec<String>>> {
    Json(BTreeMap::from([("operators", app.operator_names())]))
}

async fn providers(State(app): State<Arc<App>>) -> Json<BTreeMap<&'static str, Vec<String>>> {
    Json(BTreeMap::from([("providers", app.provider_names())]))
}

async fn lake_tables(State(app): State<Arc<App>>) -> Json<crate::app::LakeListing> {
    Json(app.lake_listing())
}

#[derive(Debug, Default, Deserialize)]
struct PreviewParams {
    rows: Option<usize>,
}

/// `/lake/tables/{id}/preview`; ids may contain `/` for nested lake files.
async fn lake_preview(
    State(app): State<Arc<App>>,
    Path(rest): Path<String>,
    Query(params): Query<PreviewParams>,
) -> Reply<crate::app::TableView> {
    let Some(table_id) = rest.strip_suffix("/preview") else {
        return Err(ServiceError::BadRequest(format!("no such route: /lake/tables/{rest}")).at(None));
    };
    let table_id = table_id.to_string();
    let rows = params.rows.unwrap_or(DEFAULT_PREVIEW_ROWS);
    blocking(app, None, move |app| app.lake_preview(&table_id, rows)).await
}

async fn not_found() -> ApiError {
    ServiceError::BadRequest("no such route".into()).at(None)
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/query-table", post(post_query_table).get(get_query_table))
        .route("/sessions/{id}/discover", post(discover))
        .route("/sessions/{id}/selection", post(selection))
        .route("/sessions/{id}/align", post(align))
        .route("/sessions/{id}/mapping", get(get_mapping).put(put_mapping))
        .route("/sessions/{id}/integrate", post(integrate))
        .route("/sessions/{id}/integrations/{operator}", get(get_integration))
        .route("/sessions/{id}/analyze", post(analyze))
        .route("/sessions/{id}/reset", post(reset))
        .route("/methods", get(methods))
        .route("/operators", get(operators))
        .route("/providers", get(providers))
        .route("/lake/tables", get(lake_tables))
        .route("/lake/tables/{*rest}", get(lake_preview))
        .fallback(not_found)
        .with_state(app)
}
