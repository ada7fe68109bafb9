//! HTTP/JSON API over the levers engine: graph storage with optimistic
//! versioning, asynchronous analysis jobs, synchronous dynamics runs and
//! perspective/scenario comparisons.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Request, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::sync::Semaphore;
use tower_http::cors::{Any, CorsLayer};

pub mod config;
pub mod error;
mod routes;
pub mod store;

pub use config::Config;
pub use error::{ApiError, ApiResult, ErrorBody};
pub use store::{JobMeta, JobStatus, JobView, Store};

pub const SCHEMA_VERSION: &str = "1";
pub const SCHEMA_HEADER: HeaderName = HeaderName::from_static("x-levers-schema-version");
/// Upper bound on `max_iter` accepted by the dynamics endpoint.
pub const MAX_DYNAMICS_ITER: usize = 100_000;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    slots: Arc<Semaphore>,
    token: Option<Arc<str>>,
}

impl AppState {
    pub fn new(store: Store, max_jobs: usize, token: Option<String>) -> Self {
        Self {
            store: Arc::new(store),
            slots: Arc::new(Semaphore::new(max_jobs.max(1))),
            token: token.map(Arc::from),
        }
    }

    pub fn open(config: &Config) -> io::Result<Self> {
        let store = Store::open(&config.data_dir)?;
        Ok(Self::new(store, config.max_jobs, config.token.clone()))
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any)
        .expose_headers([header::ETAG, header::LOCATION, SCHEMA_HEADER]);

    Router::new()
        .route("/", get(routes::index))
        .route("/graphs", get(routes::list_graphs).post(routes::create_graph))
        .route(
            "/graphs/{id}",
            get(routes::get_graph).put(routes::replace_graph).delete(routes::delete_graph),
        )
        .route("/graphs/{id}/analyses", post(routes::submit_analysis))
        .route("/graphs/{id}/dynamics", post(routes::run_dynamics))
        .route("/analyses", get(routes::list_analyses))
        .route("/analyses/{job}", get(routes::get_analysis).delete(routes::cancel_analysis))
        .route("/analyses/{job}/report", get(routes::get_report))
        .route("/compare/perspectives", post(routes::compare_perspectives))
        .route("/compare/scenarios", post(routes::compare_scenarios))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .layer(middleware::map_response(stamp_schema_version))
        .layer(cors)
        .with_state(state)
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_ref()) {
            let mut res =
                ApiError::new(StatusCode::UNAUTHORIZED, "UNAUTHORIZED", "missing or wrong bearer token")
                    .into_response();
            res.headers_mut()
                .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
            return res;
        }
    }
    next.run(request).await
}

async fn stamp_schema_version(mut response: Response) -> Response {
    response
        .headers_mut()
        .insert(SCHEMA_HEADER, HeaderValue::from_static(SCHEMA_VERSION));
    response
}

/// Binds `0.0.0.0:{port}` and serves until Ctrl-C.
pub async fn serve(config: Config) -> io::Result<()> {
    let state = AppState::open(&config)?;
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, data_dir = %config.data_dir.display(), "levers service listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
