//! JSON API over a run directory.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{error, info};
use serde::{Deserialize, Serialize};
use serde_json::json;

use sweepscope_core::metrics::{direction_table, Direction};
use sweepscope_core::model::NOISE;
use sweepscope_core::projection::{hex, Channel, ColorMode};
use sweepscope_core::run::{run_violins, size_attribute};
use sweepscope_core::text::{class_term_frequencies, topic_weight_cloud, transition_term_delta, TermCloud};
use sweepscope_core::transitions::ColorRef;
use sweepscope_core::CoreError;

use crate::classes::ClassSpec;
use crate::persist::{read_status, RunState, MANIFEST};
use crate::store::{RunStore, UpdateError};

/// Loading state of the served run.
#[derive(Debug)]
pub enum Phase {
    Loading,
    Failed(String),
    Ready(Arc<RunStore>),
}

#[derive(Debug)]
pub struct AppState {
    phase: RwLock<Phase>,
}

impl AppState {
    pub fn loading() -> Arc<Self> {
        Arc::new(Self { phase: RwLock::new(Phase::Loading) })
    }

    pub fn ready(store: RunStore) -> Arc<Self> {
        Arc::new(Self { phase: RwLock::new(Phase::Ready(Arc::new(store))) })
    }

    fn set(&self, phase: Phase) {
        *self.phase.write().expect("phase lock") = phase;
    }

    fn store(&self) -> Result<Arc<RunStore>, ApiError> {
        match &*self.phase.read().expect("phase lock") {
            Phase::Ready(store) => Ok(store.clone()),
            Phase::Loading => Err(ApiError::new(StatusCode::CONFLICT, "run is still computing")),
            Phase::Failed(msg) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, msg.clone())),
        }
    }
}

/// Waits for `dir` to hold a finished run, then loads it. While the run is
/// still being written every data endpoint answers 409.
pub async fn load_when_ready(state: Arc<AppState>, dir: PathBuf) {
    loop {
        let computing = read_status(&dir).is_some_and(|s| s.state == RunState::Computing);
        if dir.join(MANIFEST).exists() && !computing {
            break;
        }
        if !computing {
            state.set(Phase::Failed(format!("{} is not a run directory", dir.display())));
            return;
        }
        tokio::time::sleep(Duration::from_millis(250)).await;
    }
    let opened = tokio::task::spawn_blocking({
        let dir = dir.clone();
        move || RunStore::open(&dir)
    })
    .await;
    match opened {
        Ok(Ok(store)) => {
            info!("serving {}", dir.display());
            state.set(Phase::Ready(Arc::new(store)));
        }
        Ok(Err(e)) => {
            error!("cannot load {}: {e}", dir.display());
            state.set(Phase::Failed(e.to_string()));
        }
        Err(e) => state.set(Phase::Failed(e.to_string())),
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<UpdateError> for ApiError {
    fn from(e: UpdateError) -> Self {
        match e {
            UpdateError::UnknownKey(_) => Self::not_found(e.to_string()),
            UpdateError::Invalid(_) => Self::invalid(e.to_string()),
            UpdateError::Service(inner) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, inner.to_string()),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        UpdateError::from(e).into()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/run", get(get_run))
        .route("/iterations/{key}", get(get_iteration))
        .route("/transitions", get(get_transitions))
        .route("/embedding", get(get_embedding))
        .route("/violins", get(get_violins))
        .route("/archetypes", get(get_archetypes))
        .route("/archetypes/sweep", get(get_sweep))
        .route("/archetypes/threshold", post(post_threshold))
        .route("/visibility", post(post_visibility))
        .route("/sizes", get(get_sizes))
        .route("/class", post(post_class))
        .route("/class/{file}", get(get_class_csv))
        .route("/wordclouds", get(get_wordclouds))
        .route("/term-delta", get(get_term_delta))
        .with_state(state)
}

#[derive(Serialize)]
struct IterationSummary<'a> {
    key: &'a str,
    param_value: f64,
    metrics: &'a sweepscope_core::metrics::MetricRecord,
    visible: bool,
    complete: bool,
    complete_ignoring_noise: bool,
}

#[derive(Serialize)]
struct MetricDirection {
    name: &'static str,
    direction: Direction,
}

async fn get_run(State(state): State<Arc<AppState>>) -> ApiResult<Json<serde_json::Value>> {
    let store = state.store()?;
    let view = store.view();
    let model = &view.archetypes;
    let iterations: Vec<IterationSummary<'_>> = store
        .iterations
        .iter()
        .zip(&view.visible)
        .map(|(it, &visible)| IterationSummary {
            key: &it.iteration_key,
            param_value: it.param_value,
            metrics: &it.metrics,
            visible,
            complete: model.complete_iterations.contains(&it.iteration_key),
            complete_ignoring_noise: model.complete_iterations_ignoring_noise.contains(&it.iteration_key),
        })
        .collect();
    let directions: Vec<MetricDirection> = direction_table(store.manifest.config.method.family())
        .into_iter()
        .map(|(name, direction)| MetricDirection { name, direction })
        .collect();
    Ok(Json(json!({
        "manifest": store.manifest,
        "method": store.manifest.config.method,
        "iterations": iterations,
        "directions": directions,
        "default_threshold": store.analysis.default_threshold,
        "threshold": model.threshold,
        "pairs": view.pairs,
    })))
}

async fn get_iteration(State(state): State<Arc<AppState>>, Path(key): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let store = state.store()?;
    let it = store.iteration(&key).ok_or_else(|| ApiError::not_found(format!("unknown iteration `{key}`")))?;
    Ok(Json(json!({
        "iteration_key": it.iteration_key,
        "param_value": it.param_value,
        "item_ids": store.table.item_ids,
        "assignments": it.assignments,
        "membership": it.membership,
        "outlier": it.outlier,
        "groups": it.groups,
        "metrics": it.metrics,
    })))
}

#[derive(Deserialize)]
struct PairQuery {
    from: String,
    to: String,
}

async fn get_transitions(State(state): State<Arc<AppState>>, Query(q): Query<PairQuery>) -> ApiResult<impl IntoResponse> {
    let store = state.store()?;
    Ok(Json(store.transition(&q.from, &q.to)?.as_ref().clone()))
}

#[derive(Deserialize)]
struct EmbeddingQuery {
    method: String,
    #[serde(default)]
    color_mode: Option<ColorMode>,
}

async fn get_embedding(
    State(state): State<Arc<AppState>>,
    Query(q): Query<EmbeddingQuery>,
) -> ApiResult<Json<serde_json::Value>> {
    let store = state.store()?;
    let layout = store
        .layouts
        .get(&q.method)
        .ok_or_else(|| ApiError::not_found(format!("no embedding for method `{}`", q.method)))?;
    let view = store.view();
    let colors = &store.analysis.colors;
    let mode = q.color_mode.unwrap_or(ColorMode::ByItem);
    let dot_colors: Vec<String> = colors.colors(&view.archetypes, mode).into_iter().map(hex).collect();
    Ok(Json(json!({
        "layout": layout,
        "rows": store.analysis.pooled.rows,
        "color_table": colors,
        "color_mode": mode,
        "dot_colors": dot_colors,
        "archetype_labels": view.archetypes.labels,
    })))
}

#[derive(Deserialize)]
struct ViolinQuery {
    channel: String,
}

async fn get_violins(State(state): State<Arc<AppState>>, Query(q): Query<ViolinQuery>) -> ApiResult<impl IntoResponse> {
    let channel = match q.channel.as_str() {
        "membership" => Channel::Membership,
        "outlier" => Channel::Outlier,
        "split" => Channel::Split,
        other => return Err(ApiError::invalid(format!("unknown channel `{other}`"))),
    };
    let store = state.store()?;
    let view = store.view();
    let visible: Vec<_> =
        store.iterations.iter().zip(&view.visible).filter(|(_, v)| **v).map(|(it, _)| it.clone()).collect();
    Ok(Json(run_violins(&visible, channel)))
}

async fn get_archetypes(State(state): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    let store = state.store()?;
    let view = store.view();
    Ok(Json(store.summary(&view.archetypes)))
}

async fn get_sweep(State(state): State<Arc<AppState>>) -> ApiResult<Json<serde_json::Value>> {
    let store = state.store()?;
    Ok(Json(json!({
        "default_threshold": store.analysis.default_threshold,
        "threshold": store.view().archetypes.threshold,
        "points": store.analysis.sweep_curve,
    })))
}

#[derive(Deserialize)]
struct ThresholdBody {
    value: usize,
}

async fn post_threshold(State(state): State<Arc<AppState>>, Json(body): Json<ThresholdBody>) -> ApiResult<impl IntoResponse> {
    let store = state.store()?;
    let worker = store.clone();
    let view = tokio::task::spawn_blocking(move || worker.set_threshold(body.value))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(store.summary(&view.archetypes)))
}

#[derive(Deserialize)]
struct VisibilityBody {
    keys: Vec<String>,
}

async fn post_visibility(
    State(state): State<Arc<AppState>>,
    Json(body): Json<VisibilityBody>,
) -> ApiResult<Json<serde_json::Value>> {
    let store = state.store()?;
    let view = store.set_visible(&body.keys)?;
    let visible: Vec<String> =
        store.keys().into_iter().zip(&view.visible).filter(|(_, v)| **v).map(|(k, _)| k).collect();
    Ok(Json(json!({ "visible": visible, "pairs": view.pairs })))
}

#[derive(Deserialize)]
struct SizeQuery {
    attribute: String,
}

async fn get_sizes(State(state): State<Arc<AppState>>, Query(q): Query<SizeQuery>) -> ApiResult<Json<serde_json::Value>> {
    let store = state.store()?;
    let view = store.view();
    let sizes = size_attribute(&store.iterations, &store.analysis.pooled, &view.archetypes, &q.attribute)
        .map_err(|e| match e {
            CoreError::UnknownAttribute(_) => ApiError::not_found(e.to_string()),
            other => other.into(),
        })?;
    Ok(Json(json!({ "attribute": q.attribute, "sizes": sizes })))
}

async fn post_class(State(state): State<Arc<AppState>>, Json(spec): Json<ClassSpec>) -> ApiResult<Json<serde_json::Value>> {
    let store = state.store()?;
    let class = store.add_class(spec)?;
    let counts: Vec<(String, usize)> =
        class.attribute.labels.iter().map(|l| (l.clone(), class.attribute.count(l))).collect();
    Ok(Json(json!({
        "id": class.id,
        "name": class.attribute.name,
        "labels": class.attribute.labels,
        "counts": counts,
        "palette": class.attribute.palette,
        "csv": format!("/class/{}.csv", class.id),
    })))
}

async fn get_class_csv(State(state): State<Arc<AppState>>, Path(file): Path<String>) -> ApiResult<Response> {
    let store = state.store()?;
    let id = file.strip_suffix(".csv").ok_or_else(|| ApiError::not_found("class files end in .csv"))?;
    if store.class(id).is_none() {
        return Err(ApiError::not_found(format!("unknown class `{id}`")));
    }
    let path = store.class_path(id);
    let body = std::fs::read(&path).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response())
}

#[derive(Deserialize)]
struct CloudQuery {
    class: String,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    top_n: Option<usize>,
}

async fn get_wordclouds(State(state): State<Arc<AppState>>, Query(q): Query<CloudQuery>) -> ApiResult<impl IntoResponse> {
    let store = state.store()?;
    let corpus = store.corpus.as_ref().ok_or_else(|| ApiError::invalid("word clouds need a text run"))?;
    let class = store.class(&q.class).ok_or_else(|| ApiError::not_found(format!("unknown class `{}`", q.class)))?;
    let attribute = &class.attribute;
    let clouds: Vec<TermCloud> = match q.mode.as_deref().unwrap_or("frequency") {
        "frequency" => class_term_frequencies(&corpus.docs, &attribute.values, Some(&attribute.labels))?,
        "topic_weight" => {
            let top_n = q.top_n.unwrap_or(30);
            let mut clouds = Vec::new();
            for label in &attribute.labels {
                if let Some(ColorRef::Group { iteration_key, group_id }) = attribute.palette.get(label) {
                    if *group_id == NOISE {
                        continue;
                    }
                    let group = store
                        .iteration(iteration_key)
                        .and_then(|it| it.group(*group_id))
                        .ok_or_else(|| ApiError::not_found(format!("unknown group for `{label}`")))?;
                    clouds.push(topic_weight_cloud(&group.representative, &corpus.dictionary, top_n, label)?);
                }
            }
            clouds
        }
        other => return Err(ApiError::invalid(format!("unknown cloud mode `{other}`"))),
    };
    Ok(Json(clouds))
}

#[derive(Deserialize)]
struct DeltaQuery {
    from: String,
    from_group: i64,
    to: String,
    to_group: i64,
    #[serde(default)]
    top_n: Option<usize>,
}

async fn get_term_delta(State(state): State<Arc<AppState>>, Query(q): Query<DeltaQuery>) -> ApiResult<impl IntoResponse> {
    let store = state.store()?;
    let corpus = store.corpus.as_ref().ok_or_else(|| ApiError::invalid("term deltas need a text run"))?;
    let row = |key: &str, group: i64| {
        let it = store.iteration(key).ok_or_else(|| ApiError::not_found(format!("unknown iteration `{key}`")))?;
        it.group(group)
            .map(|g| g.representative.clone())
            .ok_or_else(|| ApiError::not_found(format!("unknown group {group} in `{key}`")))
    };
    let (from, to) = (row(&q.from, q.from_group)?, row(&q.to, q.to_group)?);
    let label = format!("{}.{}→{}.{}", q.from, q.from_group, q.to, q.to_group);
    Ok(Json(transition_term_delta(&from, &to, &corpus.dictionary, q.top_n.unwrap_or(20), &label)?))
}

/// Binds `addr` and serves `dir` until interrupted.
pub async fn serve(dir: PathBuf, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let state = AppState::loading();
    tokio::spawn(load_when_ready(state.clone(), dir));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
