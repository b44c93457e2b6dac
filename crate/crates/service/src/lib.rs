//! HTTP API for playing the poacher against a simulated ranger.
//!
//! | method | path | body |
//! |---|---|---|
//! | `POST` | `/sessions` | `{"preset":"c"}` or `{"distribution":[..]}`, optional `ranger`, `seed`, `horizon` |
//! | `POST` | `/sessions/{id}/moves` | `{"round":1,"site":0}` |
//! | `GET` | `/sessions/{id}` | |
//! | `GET` | `/sessions/{id}/log` | JSONL download |
//! | `GET` | `/presets` | |
//!
//! Errors are `{"error":{"code":...,"message":...}}` with a 4xx/5xx status.
//! Each session is stored as `<data_dir>/<id>.jsonl` and reloaded on start.

mod error;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use poachlab_core::{AgentSpec, RhinoDistribution, Site};
use rand::Rng;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ServiceError;
use session::{default_ranger, human_config, preset, MoveResult, Session, SessionDescriptor, SessionView, PRESETS};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Origin allowed by CORS; any origin when `None`.
    pub allowed_origin: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    data_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    /// Opens `data_dir`, creating it if needed, and reloads every session
    /// log found there. Logs that fail to replay are skipped with a warning.
    pub fn open(data_dir: PathBuf) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(&data_dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&data_dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                match Session::restore(&path) {
                    Ok(s) => {
                        sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
                    }
                    Err(e) => log::warn!("skipping {}: {e}", path.display()),
                }
            }
        }
        Ok(Self { inner: Arc::new(Inner { data_dir, sessions: RwLock::new(sessions) }) })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        let sessions = self.inner.sessions.read().expect("session map poisoned");
        sessions.get(id).cloned().ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().expect("session map poisoned").len()
    }
}

pub fn router(state: AppState, allowed_origin: Option<&str>) -> Result<Router, ServiceError> {
    let origin = match allowed_origin {
        Some(o) => AllowOrigin::exact(
            HeaderValue::from_str(o).map_err(|_| ServiceError::BadRequest(format!("bad origin {o:?}")))?,
        ),
        None => AllowOrigin::from(Any),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any);
    Ok(Router::new()
        .route("/presets", get(list_presets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/moves", post(submit_move))
        .route("/sessions/{id}/log", get(download_log))
        .layer(cors)
        .with_state(state))
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::open(config.data_dir.clone())?;
    log::info!("loaded {} sessions from {}", state.session_count(), config.data_dir.display());
    let app = router(state, config.allowed_origin.as_deref())?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

#[derive(Serialize)]
struct PresetView {
    id: &'static str,
    distribution: &'static [f64],
}

async fn list_presets() -> Json<Vec<PresetView>> {
    Json(PRESETS.iter().map(|p| PresetView { id: p.id, distribution: p.distribution }).collect())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecInput {
    Text(String),
    Table(AgentSpec),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    preset: Option<String>,
    distribution: Option<Vec<f64>>,
    ranger: Option<SpecInput>,
    seed: Option<u64>,
    horizon: Option<usize>,
}

// Seeds stay below 2^53 so JavaScript clients read them exactly.
const MAX_SEED: u64 = 1 << 53;

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionDescriptor>), ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let distribution = match (req.preset, req.distribution) {
        (Some(id), None) => preset(&id).ok_or(ServiceError::UnknownPreset(id))?,
        (None, Some(d)) => RhinoDistribution::new(d)?,
        _ => return Err(ServiceError::BadRequest("give exactly one of preset or distribution".into())),
    };
    let ranger = match req.ranger {
        None => default_ranger(),
        Some(SpecInput::Text(s)) => s.parse()?,
        Some(SpecInput::Table(spec)) => spec,
    };
    let mut rng = rand::rng();
    let seed = req.seed.unwrap_or_else(|| rng.random_range(0..MAX_SEED));
    let horizon = req.horizon.unwrap_or(session::DEFAULT_HORIZON);
    let id = format!("{:032x}", rng.random::<u128>());

    let session = Session::create(id.clone(), human_config(distribution, ranger, horizon, seed), &state.inner.data_dir)?;
    let descriptor = session.descriptor();
    state.inner.sessions.write().expect("session map poisoned").insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(descriptor)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    let session = state.session(&id)?;
    let view = session.lock().expect("session poisoned").view();
    Ok(Json(view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveRequest {
    round: usize,
    site: Site,
}

async fn submit_move(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<MoveRequest>, JsonRejection>,
) -> Result<Json<MoveResult>, ServiceError> {
    let session = state.session(&id)?;
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let result = session.lock().expect("session poisoned").submit(req.round, req.site)?;
    Ok(Json(result))
}

async fn download_log(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    let session = state.session(&id)?;
    let text = {
        let guard = session.lock().expect("session poisoned");
        std::fs::read_to_string(guard.log_path())?
    };
    Ok((
        [
            (header::CONTENT_TYPE, "application/x-ndjson".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{id}.jsonl\"")),
        ],
        text,
    ))
}
