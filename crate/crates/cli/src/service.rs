//! HTTP prediction and generation API over one immutable model.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ibtm::generate::{generate, DEFAULT_TOP_LOCATIONS};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::api::{
    parse_generate_request, parse_predict_request, predict_response, FieldError, GenerateResponse, LoadedModel,
};

/// Shared by every handler; nothing in it changes after startup except the
/// audit file, whose writes are serialized.
pub struct AppState {
    pub model: LoadedModel,
    pub bandwidth: f64,
    audit: Option<Mutex<File>>,
}

impl AppState {
    pub fn new(model: LoadedModel, bandwidth: f64) -> Self {
        Self {
            model,
            bandwidth,
            audit: None,
        }
    }

    /// Appends one JSON line per predict/generate call to `path`.
    pub fn with_audit_log(mut self, path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.audit = Some(Mutex::new(file));
        Ok(self)
    }

    fn audit(&self, endpoint: &str, request: &Value, status: StatusCode) {
        let Some(log) = &self.audit else { return };
        let time = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let line = json!({
            "time": time,
            "endpoint": endpoint,
            "status": status.as_u16(),
            "request": request,
        });
        let mut file = log.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(file, "{line}") {
            tracing::warn!("audit log write failed: {e}");
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub static_dir: Option<PathBuf>,
}

fn error(status: StatusCode, message: impl Into<String>, fields: Vec<FieldError>) -> Response {
    let mut body = json!({ "error": message.into() });
    if !fields.is_empty() {
        body["fields"] = json!(fields);
    }
    (status, Json(body)).into_response()
}

fn parse_body(body: &Bytes) -> Result<Value, Box<Response>> {
    serde_json::from_slice(body).map_err(|e| {
        Box::new(error(
            StatusCode::BAD_REQUEST,
            "malformed JSON body",
            vec![FieldError {
                field: String::new(),
                message: e.to_string(),
            }],
        ))
    })
}

async fn healthz() -> &'static str {
    "ok"
}

async fn labels(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "labels": state.model.model.label_vocab.labels() }))
}

async fn model_info(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!(state.model.metadata()))
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let value = match parse_body(&body) {
        Ok(v) => v,
        Err(r) => return *r,
    };
    let response = match parse_predict_request(&value) {
        Err(fields) => error(StatusCode::BAD_REQUEST, "invalid predict request", fields),
        Ok(req) if req.points.is_empty() => error(StatusCode::UNPROCESSABLE_ENTITY, "drawing has no points", vec![]),
        Ok(req) => {
            let bandwidth = req.bandwidth.unwrap_or(state.bandwidth);
            match predict_response(&state.model, &req.points, bandwidth) {
                Ok(r) => Json(r).into_response(),
                Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), vec![]),
            }
        }
    };
    state.audit("predict", &value, response.status());
    response
}

async fn generate_drawing(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let value = match parse_body(&body) {
        Ok(v) => v,
        Err(r) => return *r,
    };
    let response = match parse_generate_request(&value) {
        Err(fields) => error(StatusCode::BAD_REQUEST, "invalid generate request", fields),
        Ok(req) => match generate(&req.label, &state.model.model, req.top.unwrap_or(DEFAULT_TOP_LOCATIONS)) {
            Ok(drawing) => Json(GenerateResponse {
                drawing,
                model: state.model.info.clone(),
            })
            .into_response(),
            Err(e @ ibtm::Error::UnknownLabel(_)) => error(StatusCode::NOT_FOUND, e.to_string(), vec![]),
            Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), vec![]),
        },
    };
    state.audit("generate", &value, response.status());
    response
}

pub fn router(state: AppState, options: &ServeOptions) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/labels", get(labels))
        .route("/v1/model", get(model_info))
        .route("/v1/predict", post(predict))
        .route("/v1/generate", post(generate_drawing))
        .with_state(Arc::new(state));
    let app = match &options.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(app: Router, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
