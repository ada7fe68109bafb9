use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::Utc;
use levers_core::controllability::Progress;
use levers_core::decision::{analyze_with_progress, compare_scenarios as diff_scenarios};
use levers_core::dynamics::{
    iterate_to_fixed_point, rank_factors, IterationOptions, MappingKind, MappingSpec, StateVector,
};
use levers_core::model::graph_to_value;
use levers_core::{
    AnalysisReport, Budget, ControllabilityScale, Error as CoreError, FcmGraph, Perspective,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::store::{GraphEntry, JobMeta, JobStatus};
use crate::{AppState, MAX_DYNAMICS_ITER, SCHEMA_VERSION};

pub async fn index() -> Json<Value> {
    Json(json!({
        "service": "levers",
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": SCHEMA_VERSION,
        "links": {
            "graphs": "/graphs",
            "analyses": "/analyses",
            "compare_perspectives": "/compare/perspectives",
            "compare_scenarios": "/compare/scenarios",
        },
    }))
}

pub async fn list_graphs(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "graphs": state.store.list_graphs() }))
}

pub async fn create_graph(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let (graph, warnings) = levers_core::model::graph_from_value(parse_body(&body)?)?;
    let entry = state.store.create_graph(graph)?;
    let mut res = (
        StatusCode::CREATED,
        Json(json!({ "id": entry.id, "version": entry.version, "warnings": warnings })),
    )
        .into_response();
    set_location(&mut res, &format!("/graphs/{}", entry.id));
    set_etag(&mut res, entry.version);
    Ok(res)
}

pub async fn get_graph(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.store.graph(&id)?;
    let mut res = Json(graph_json(&entry)).into_response();
    set_etag(&mut res, entry.version);
    Ok(res)
}

pub async fn replace_graph(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "IF_MATCH_REQUIRED",
            "PUT requires an If-Match header carrying the graph version",
        )
    })?;
    let (graph, warnings) = levers_core::model::graph_from_value(parse_body(&body)?)?;
    let entry = state.store.replace_graph(&id, expected, graph)?;
    let mut res = Json(json!({ "id": entry.id, "version": entry.version, "warnings": warnings }))
        .into_response();
    set_etag(&mut res, entry.version);
    Ok(res)
}

pub async fn delete_graph(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<StatusCode> {
    state.store.delete_graph(&id, if_match(&headers)?)?;
    Ok(StatusCode::NO_CONTENT)
}

/// A perspective given either by label (looked up on the graph) or inline.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum PerspectiveRef {
    Label(String),
    Inline(Perspective),
}

impl PerspectiveRef {
    fn resolve(&self, graph: &FcmGraph) -> ApiResult<Perspective> {
        match self {
            PerspectiveRef::Label(label) => graph.perspective(label).cloned().ok_or_else(|| {
                ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "UNKNOWN_PERSPECTIVE",
                    format!("graph has no perspective labelled {label:?}"),
                )
            }),
            PerspectiveRef::Inline(p) => {
                graph.check_perspective(p)?;
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisRequest {
    #[serde(default)]
    budget: Option<Budget>,
    #[serde(default)]
    perspective: Option<PerspectiveRef>,
    #[serde(default)]
    scale: Option<ControllabilityScale>,
}

pub async fn submit_analysis(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let request: AnalysisRequest = parse_body(&body)?;
    let entry = state.store.graph(&id)?;
    let graph = entry.graph.clone();
    graph.ensure_no_self_loops()?;
    let budget = request.budget.unwrap_or_default();
    check_budget(&budget)?;
    let scale = request.scale.unwrap_or_default();
    scale.validate()?;
    let perspective = request.perspective.map(|p| p.resolve(&graph)).transpose()?;

    let meta = JobMeta {
        id: uuid::Uuid::new_v4().to_string(),
        graph_id: entry.id.clone(),
        graph_version: entry.version,
        status: JobStatus::Queued,
        budget,
        perspective,
        scale,
        created_at: Utc::now(),
        started_at: None,
        finished_at: None,
        candidates_tested: 0,
        error: None,
    };
    let job_id = meta.id.clone();
    let progress = state.store.create_job(meta.clone())?;
    tokio::spawn(run_analysis(state.clone(), meta, graph, progress));

    let view = state.store.job(&job_id)?;
    let mut res = (StatusCode::ACCEPTED, Json(view)).into_response();
    set_location(&mut res, &format!("/analyses/{job_id}"));
    Ok(res)
}

async fn run_analysis(state: AppState, meta: JobMeta, graph: Arc<FcmGraph>, progress: Arc<Progress>) {
    let Ok(_permit) = state.slots.clone().acquire_owned().await else {
        return;
    };
    match state.store.start_job(&meta.id) {
        Ok(true) => {}
        Ok(false) => return,
        Err(e) => {
            tracing::error!(job = %meta.id, error = %e, "could not start analysis");
            return;
        }
    }
    let job = meta.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        analyze_with_progress(&graph, &job.budget, job.perspective.as_ref(), &job.scale, &progress)
            .map_err(ApiError::from)
    })
    .await
    .unwrap_or_else(|e| Err(ApiError::internal(format!("analysis task failed: {e}"))));
    if let Err(e) = state.store.finish_job(&meta.id, outcome) {
        tracing::error!(job = %meta.id, error = %e, "could not record analysis result");
    }
}

pub async fn list_analyses(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "analyses": state.store.list_jobs() }))
}

pub async fn get_analysis(State(state): State<AppState>, Path(job): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.store.job(&job)?).into_response())
}

pub async fn cancel_analysis(
    State(state): State<AppState>,
    Path(job): Path<String>,
) -> ApiResult<Response> {
    Ok(Json(state.store.cancel_job(&job)?).into_response())
}

/// The report exactly as written to disk, byte-for-byte what
/// `levers analyze --out` produces for the same graph and budget.
pub async fn get_report(State(state): State<AppState>, Path(job): Path<String>) -> ApiResult<Response> {
    let text = state.store.report_text(&job)?;
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        text.as_str().to_owned(),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsRequest {
    mapping: MappingKind,
    #[serde(default)]
    lambda: Option<f64>,
    /// Initial activations; factors left out start at the mapping's neutral value.
    #[serde(default)]
    x0: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    max_iter: Option<usize>,
}

pub async fn run_dynamics(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let request: DynamicsRequest = parse_body(&body)?;
    let entry = state.store.graph(&id)?;
    let mapping = MappingSpec {
        kind: request.mapping,
        lambda: request.lambda.unwrap_or(1.0),
    };
    let defaults = IterationOptions::default();
    let options = IterationOptions {
        tol: request.tol.unwrap_or(defaults.tol),
        max_iter: request.max_iter.unwrap_or(defaults.max_iter).min(MAX_DYNAMICS_ITER),
    };
    let x0 = match request.x0 {
        None => None,
        Some(given) => {
            let graph = &entry.graph;
            if let Some(unknown) = given.keys().find(|k| graph.index_of(k).is_none()) {
                return Err(CoreError::UnknownFactor(unknown.clone()).into());
            }
            let mut state = StateVector::uniform(&graph.ids(), mapping.default_activation());
            state.values.extend(given);
            Some(state)
        }
    };
    let graph = entry.graph.clone();
    let trajectory = tokio::task::spawn_blocking(move || iterate_to_fixed_point(&graph, &mapping, x0, &options))
        .await
        .map_err(|e| ApiError::internal(format!("dynamics task failed: {e}")))??;
    let last = trajectory.fixed_point.as_ref().or(trajectory.states.last());
    let ranking = last.map(rank_factors).unwrap_or_default();
    Ok(Json(json!({
        "graph_id": entry.id,
        "graph_version": entry.version,
        "mapping": mapping,
        "tol": options.tol,
        "max_iter": options.max_iter,
        "converged": trajectory.converged,
        "fixed_point": trajectory.fixed_point,
        "ranking": ranking,
        "trajectory": trajectory.states,
    }))
    .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComparePerspectivesRequest {
    /// A stored graph id, or an inline graph document.
    graph: Value,
    p1: PerspectiveRef,
    p2: PerspectiveRef,
    #[serde(default)]
    budget: Option<Budget>,
    #[serde(default)]
    scale: Option<ControllabilityScale>,
}

pub async fn compare_perspectives(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let request: ComparePerspectivesRequest = parse_body(&body)?;
    let graph = match request.graph {
        Value::String(id) => state.store.graph(&id)?.graph,
        doc @ Value::Object(_) => Arc::new(levers_core::model::graph_from_value(doc)?.0),
        _ => return Err(ApiError::invalid("graph must be a graph id or a graph document")),
    };
    let p1 = request.p1.resolve(&graph)?;
    let p2 = request.p2.resolve(&graph)?;
    let budget = request.budget.unwrap_or_default();
    check_budget(&budget)?;
    let scale = request.scale.unwrap_or_default();
    let diff = tokio::task::spawn_blocking(move || {
        levers_core::decision::compare_perspectives(&graph, &p1, &p2, &budget, &scale)
    })
    .await
    .map_err(|e| ApiError::internal(format!("comparison task failed: {e}")))??;
    Ok(Json(diff).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct CompareScenariosRequest {
    /// Each side is a finished analysis job id or an inline report.
    analysis_a: Value,
    analysis_b: Value,
}

pub async fn compare_scenarios(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let request: CompareScenariosRequest = parse_body(&body)?;
    let a = report_ref(&state, request.analysis_a, "analysisA")?;
    let b = report_ref(&state, request.analysis_b, "analysisB")?;
    Ok(Json(diff_scenarios(&a, &b)).into_response())
}

fn report_ref(state: &AppState, value: Value, field: &str) -> ApiResult<AnalysisReport> {
    match value {
        Value::String(job) => state.store.report(&job),
        report @ Value::Object(_) => serde_json::from_value(report).map_err(|e| {
            let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "SCHEMA", e.to_string());
            err.body.path = Some(field.to_string());
            err
        }),
        _ => Err(ApiError::invalid(format!(
            "{field} must be an analysis id or a report"
        ))),
    }
}

fn graph_json(entry: &GraphEntry) -> Value {
    json!({
        "id": entry.id,
        "version": entry.version,
        "created_at": entry.created_at,
        "updated_at": entry.updated_at,
        "graph": graph_to_value(&entry.graph),
    })
}

fn check_budget(budget: &Budget) -> ApiResult<()> {
    if budget.max_configs == 0 || budget.max_millis == 0 {
        return Err(ApiError::invalid("budget limits must be positive"));
    }
    Ok(())
}

/// Empty bodies read as `{}` so optional-only requests need no payload.
/// Malformed JSON is a 400; well-formed JSON of the wrong shape is a 422.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let body: &[u8] = if body.iter().all(u8::is_ascii_whitespace) {
        b"{}"
    } else {
        body
    };
    serde_json::from_slice(body).map_err(|e| {
        if e.is_data() {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_BODY", e.to_string())
        } else {
            ApiError::bad_request(format!("malformed JSON: {e}"))
        }
    })
}

/// Accepts `3`, `"3"` and `W/"3"`.
fn if_match(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    raw.to_str()
        .ok()
        .map(|s| s.trim().trim_start_matches("W/").trim_matches('"'))
        .and_then(|s| s.parse().ok())
        .map(Some)
        .ok_or_else(|| ApiError::bad_request("If-Match must carry a graph version number"))
}

fn set_etag(res: &mut Response, version: u64) {
    if let Ok(v) = HeaderValue::from_str(&format!("\"{version}\"")) {
        res.headers_mut().insert(header::ETAG, v);
    }
}

fn set_location(res: &mut Response, path: &str) {
    if let Ok(v) = HeaderValue::from_str(path) {
        res.headers_mut().insert(header::LOCATION, v);
    }
}
