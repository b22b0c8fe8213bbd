//! HTTP inference service over an immutable model.
//!
//! Endpoints:
//! - `GET /health` returns `{"status": "ok"}`, or 503 with `"loading"` until
//!   the model is available.
//! - `GET /meta` describes the model (geometry count, parameter bounds, grid
//!   and training contours).
//! - `POST /infer` runs one cross-geometry query.
//!
//! Errors are `{"error": {"code", "message"}}` with a machine-readable code.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ots_core::geometry::{self, BarycentricWeights};
use ots_core::surrogate::{self, ModelContainer};
use ots_core::{splat, Error as CoreError, FieldSample, Grid, Point};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::error::{CliError, CliResult};

/// Shared service state. The model is set once and never mutated.
pub struct AppState {
    model: OnceLock<Arc<ModelContainer>>,
    workers: Semaphore,
}

impl AppState {
    /// State whose model is still loading.
    pub fn loading(workers: usize) -> Arc<Self> {
        Arc::new(Self { model: OnceLock::new(), workers: Semaphore::new(workers.max(1)) })
    }

    pub fn ready(model: ModelContainer, workers: usize) -> Arc<Self> {
        let state = Self::loading(workers);
        state.set_model(model);
        state
    }

    /// Installs the model; later calls are ignored.
    pub fn set_model(&self, model: ModelContainer) {
        let _ = self.model.set(Arc::new(model));
    }

    pub fn model(&self) -> Option<Arc<ModelContainer>> {
        self.model.get().cloned()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(ErrorEnvelope { error: ErrorBody { code: code.into(), message: message.into() } })).into_response()
}

fn loading() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "loading", "model is still loading")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Health {
    pub status: String,
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    match state.model() {
        Some(_) => Json(Health { status: "ok".into() }).into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(Health { status: "loading".into() })).into_response(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParameterMeta {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridMeta {
    pub width: usize,
    pub height: usize,
    pub origin: Point,
    pub spacing: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Meta {
    pub k: usize,
    pub n_s: usize,
    pub sigma_s: f64,
    pub parameters: Vec<ParameterMeta>,
    pub grid: GridMeta,
    /// Closed boundary polygon of every training domain.
    pub geometries: Vec<Vec<Point>>,
    pub version: String,
}

pub fn meta_of(model: &ModelContainer) -> Meta {
    let names = ["theta", "lambda"];
    let parameters = model
        .parameter_bounds()
        .iter()
        .enumerate()
        .map(|(i, b)| ParameterMeta {
            name: names.get(i).map_or_else(|| format!("p{i}"), |s| s.to_string()),
            min: b[0],
            max: b[1],
        })
        .collect();
    let g = &model.grid;
    Meta {
        k: model.k(),
        n_s: model.config.n_s,
        sigma_s: model.config.sigma_s,
        parameters,
        grid: GridMeta { width: g.nx, height: g.ny, origin: g.origin, spacing: g.spacing },
        geometries: model.sgm.polygons.iter().map(|p| p.vertices().to_vec()).collect(),
        version: model.provenance.crate_version.clone(),
    }
}

async fn meta(State(state): State<Arc<AppState>>) -> Response {
    match state.model() {
        Some(m) => Json(meta_of(&m)).into_response(),
        None => loading(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridRequest {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InferRequest {
    pub theta: f64,
    pub lambda: f64,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridRequest>,
}

/// Row-major rasters (`index = j * width + i`); values are zero outside the
/// domain mask.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InferResponse {
    pub width: usize,
    pub height: usize,
    pub origin: Point,
    pub spacing: [f64; 2],
    pub values: Vec<f64>,
    pub levelset: Vec<f64>,
    pub integral: f64,
    pub clamped: bool,
    pub wall_ms: f64,
}

const MAX_GRID_NODES: usize = 1 << 20;

/// Field and level-set for a request; a custom `grid` resamples the
/// inferred clouds over the model box and masks to the 0.5 level-set.
pub fn run_query(model: &ModelContainer, req: &InferRequest) -> CliResult<(FieldSample, FieldSample, f64, bool)> {
    let w = BarycentricWeights::new(req.weights.clone())?;
    let theta = [req.theta, req.lambda];
    let inference = if model.sgm.interpolating() {
        surrogate::infer_cross_geometry(model, &theta, &w)?
    } else {
        if w.len() != 1 {
            return Err(CoreError::BadWeights(format!("expected 1 weight, got {}", w.len())).into());
        }
        surrogate::infer_fixed_geometry(model, 0, &theta)?
    };
    let custom = req.grid.as_ref().filter(|g| (g.nx, g.ny) != (model.grid.nx, model.grid.ny));
    let Some(gr) = custom else {
        return Ok((inference.field, inference.levelset, inference.integral, inference.clamped));
    };
    if gr.nx < 2 || gr.ny < 2 || gr.nx.saturating_mul(gr.ny) > MAX_GRID_NODES {
        return Err(CliError::Usage(format!("grid must have 2..{MAX_GRID_NODES} nodes with at least 2 per axis")));
    }
    let grid = Grid::over_box(model.grid.origin, model.grid.max_corner(), gr.nx, gr.ny)?;
    let geo = geometry::barycenter(&model.sgm.ensemble, &w)?;
    let levelset = geometry::levelset_from_cloud(&geo, &grid);
    let mut field = splat::evaluate_cloud_truncated(&inference.cloud, &grid, model.config.inference_cutoff);
    field.values.iter_mut().for_each(|v| *v *= inference.integral);
    let mut field = field.with_mask(geometry::levelset_mask(&levelset))?;
    field.zero_outside_mask();
    Ok((field, levelset, inference.integral, inference.clamped))
}

fn error_code(e: &CliError) -> &'static str {
    match e {
        CliError::Core(CoreError::BadWeights(_)) => "bad_weights",
        CliError::Core(CoreError::EmptyInterior) => "empty_domain",
        CliError::Core(e) if crate::error::is_validation(e) => "bad_params",
        CliError::Usage(_) => "bad_params",
        _ => "internal",
    }
}

async fn infer(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let Some(model) = state.model() else {
        return loading();
    };
    let req: InferRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "bad_request", format!("invalid request body: {e}")),
    };
    if !(req.theta.is_finite() && req.lambda.is_finite()) {
        return error(StatusCode::BAD_REQUEST, "bad_params", "theta and lambda must be finite");
    }
    let Ok(_permit) = state.workers.acquire().await else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "service is shutting down");
    };
    let joined = tokio::task::spawn_blocking(move || {
        let t0 = Instant::now();
        run_query(&model, &req).map(|r| (r, t0.elapsed().as_secs_f64() * 1e3))
    })
    .await;
    match joined {
        Ok(Ok(((field, levelset, integral, clamped), wall_ms))) => {
            let g = &field.grid;
            Json(InferResponse {
                width: g.nx,
                height: g.ny,
                origin: g.origin,
                spacing: g.spacing,
                values: field.values,
                levelset: levelset.values,
                integral,
                clamped,
                wall_ms,
            })
            .into_response()
        }
        Ok(Err(e)) => {
            let code = error_code(&e);
            let status = if code == "internal" { StatusCode::INTERNAL_SERVER_ERROR } else { StatusCode::BAD_REQUEST };
            error(status, code, e.to_string())
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", format!("worker failed: {e}")),
    }
}

fn cors(origin: &str) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    match origin {
        "*" => layer.allow_origin(Any),
        o => match HeaderValue::from_str(o) {
            Ok(v) => layer.allow_origin(AllowOrigin::exact(v)),
            Err(_) => {
                log::warn!("invalid CORS origin {o:?}; allowing any origin");
                layer.allow_origin(Any)
            }
        },
    }
}

pub fn router(state: Arc<AppState>, cors_origin: &str) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/meta", get(meta))
        .route("/infer", post(infer))
        .layer(cors(cors_origin))
        .with_state(state)
}

/// Binds `port`, loads the model in the background and serves until Ctrl-C.
pub fn cmd_serve(model_path: std::path::PathBuf, port: u16, workers: usize, cors_origin: &str) -> CliResult<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let state = AppState::loading(workers);
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .map_err(|e| CliError::Internal(format!("cannot bind port {port}: {e}")))?;
        log::info!("listening on port {port}");
        println!("serving on http://0.0.0.0:{port}");
        let loader = state.clone();
        tokio::task::spawn_blocking(move || match crate::formats::read_model(&model_path) {
            Ok(m) => {
                loader.set_model(m);
                log::info!("model loaded from {}", model_path.display());
            }
            Err(e) => {
                log::error!("failed to load model: {e}");
                std::process::exit(1);
            }
        });
        axum::serve(listener, router(state, cors_origin))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Internal(format!("server error: {e}")))
    })
}
