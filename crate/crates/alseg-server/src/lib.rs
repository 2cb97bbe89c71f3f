//! HTTP front end for interactive segmentation sessions.
//!
//! Every session owns one [`alseg::learner::Session`]. Training and
//! classification run as background jobs; clients poll
//! `GET /sessions/{id}/status`. Non-image bodies are TOML documents, errors
//! carry a `code` and a `message`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use alseg::learner::{emit_seeds, parse_seeds, Progress, Seed, SeedSet, Session, SessionParams};
use alseg::svm::model_to_bytes;
use alseg::volume::{make_phantom, open_volume, LoadOptions, PhantomSpec, VoxelSource, VoxelVolume};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

mod error;
mod render;

pub use error::{error_code, ApiError};
pub use render::{default_window, encode_png, slice_values, window_to_u8, Axis, Layer};

pub const TOML_TYPE: &str = "application/toml";

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy)]
pub struct ServerConfig {
    /// Worker threads per training or classification job.
    pub workers: usize,
    pub load: LoadOptions,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            workers: 1,
            load: LoadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Training,
    Classifying,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Training => "training",
            Phase::Classifying => "classifying",
        }
    }
}

#[derive(Default)]
struct Layers {
    confidence: Option<Arc<VoxelVolume>>,
    uncertainty: Option<Arc<VoxelVolume>>,
    /// Serialized model per level, `None` while untrained.
    models: Vec<Option<Vec<u8>>>,
}

struct Shared {
    phase: Phase,
    /// Taken by the running job.
    session: Option<Session>,
    /// Seeds already trained on.
    trained: Vec<Seed>,
    /// Seeds posted since the last iteration.
    pending: SeedSet,
    layers: Layers,
    iteration: u64,
    last_error: Option<ApiError>,
}

struct Handle {
    volume: Arc<VoxelVolume>,
    levels: usize,
    progress: Progress,
    shared: Mutex<Shared>,
}

impl Handle {
    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|p| p.into_inner())
    }
}

struct Store {
    config: ServerConfig,
    next_id: AtomicU64,
    sessions: Mutex<HashMap<u64, Arc<Handle>>>,
}

/// Shared server state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState {
            store: Arc::new(Store {
                config,
                next_id: AtomicU64::new(1),
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    fn sessions(&self) -> MutexGuard<'_, HashMap<u64, Arc<Handle>>> {
        self.store.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn handle(&self, id: u64) -> ApiResult<Arc<Handle>> {
        self.sessions().get(&id).cloned().ok_or(ApiError::no_session(id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/slice", get(slice))
        .route("/sessions/{id}/seeds", post(post_seeds))
        .route("/sessions/{id}/iterate", post(iterate))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/checkpoint", post(checkpoint))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(config))).await
}

fn toml_body<T: Serialize>(status: StatusCode, doc: &T) -> Response {
    let body = toml::to_string(doc).expect("response document serializes");
    (status, [(header::CONTENT_TYPE, TOML_TYPE)], body).into_response()
}

fn parse_doc<T: for<'de> Deserialize<'de>>(body: &str) -> ApiResult<T> {
    toml::from_str(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

// ---------- create / delete ----------

/// Body of `POST /sessions`: a raw volume path or an inline phantom, an
/// optional checkpoint directory to restore and session parameters under
/// `[params]`.
#[derive(Debug, Deserialize)]
struct CreateRequest {
    volume: Option<PathBuf>,
    phantom: Option<PhantomSpec>,
    checkpoint: Option<PathBuf>,
    #[serde(default)]
    params: SessionParams,
}

#[derive(Serialize)]
struct Created {
    id: u64,
    dims: [usize; 3],
}

async fn create_session(State(state): State<AppState>, body: String) -> ApiResult<Response> {
    let req: CreateRequest = parse_doc(&body)?;
    let config = state.store.config;
    let (session, restored) = blocking(move || -> ApiResult<(Session, bool)> {
        let volume = match (&req.volume, &req.phantom) {
            (Some(path), None) => open_volume(path, &config.load)?,
            (None, Some(spec)) => make_phantom(spec)?.volume,
            _ => return Err(ApiError::bad_request("give exactly one of volume and phantom")),
        };
        let volume = Arc::new(volume);
        match &req.checkpoint {
            Some(dir) => {
                let s = Session::restore_checkpoint(dir, volume)?;
                let restored = s.finest_model().is_some();
                Ok((s, restored))
            }
            None => {
                let mut params = req.params;
                set_workers(&mut params, config.workers);
                Ok((Session::new(volume, params)?, false))
            }
        }
    })
    .await??;

    let id = state.store.next_id.fetch_add(1, Ordering::Relaxed);
    let dims = session.volume().dims();
    let handle = Arc::new(Handle {
        volume: session.volume().clone(),
        levels: session.levels(),
        progress: Progress::new(),
        shared: Mutex::new(Shared {
            phase: Phase::Idle,
            trained: session.seeds().entries().to_vec(),
            pending: SeedSet::new(),
            layers: Layers {
                models: model_bytes(&session),
                ..Default::default()
            },
            iteration: session.iteration(),
            session: Some(session),
            last_error: None,
        }),
    });
    state.sessions().insert(id, handle.clone());
    if restored {
        start_job(handle, false)?;
    }
    Ok(toml_body(StatusCode::CREATED, &Created { id, dims }))
}

fn set_workers(params: &mut SessionParams, workers: usize) {
    params.classify.workers = workers.max(1);
    params.train.workers = workers.max(1);
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<StatusCode> {
    state.sessions().remove(&id).ok_or(ApiError::no_session(id))?;
    Ok(StatusCode::NO_CONTENT)
}

// ---------- status ----------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusDoc {
    pub id: u64,
    pub state: String,
    pub progress: f64,
    pub iteration: u64,
    pub dims: [usize; 3],
    pub levels: usize,
    pub seeds: usize,
    pub pending: usize,
    pub confidence: bool,
    pub error_code: Option<String>,
    pub error: Option<String>,
}

async fn status(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Response> {
    let h = state.handle(id)?;
    let sh = h.lock();
    let progress = match sh.phase {
        Phase::Idle => 0.0,
        _ => h.progress.fraction(),
    };
    let doc = StatusDoc {
        id,
        state: sh.phase.name().into(),
        progress,
        iteration: sh.iteration,
        dims: h.volume.dims(),
        levels: h.levels,
        seeds: sh.trained.len(),
        pending: sh.pending.len(),
        confidence: sh.layers.confidence.is_some(),
        error_code: sh.last_error.as_ref().map(|e| e.code.to_string()),
        error: sh.last_error.as_ref().map(|e| e.message.clone()),
    };
    Ok(toml_body(StatusCode::OK, &doc))
}

// ---------- slices ----------

#[derive(Debug, Deserialize)]
struct SliceQuery {
    axis: String,
    index: usize,
    #[serde(default = "gray")]
    layer: String,
    min: Option<f64>,
    max: Option<f64>,
}

fn gray() -> String {
    "gray".into()
}

async fn slice(State(state): State<AppState>, Path(id): Path<u64>, Query(q): Query<SliceQuery>) -> ApiResult<Response> {
    let h = state.handle(id)?;
    let axis = Axis::parse(&q.axis)?;
    let layer = Layer::parse(&q.layer)?;
    let vol = {
        let sh = h.lock();
        match layer {
            Layer::Gray => h.volume.clone(),
            Layer::Confidence => sh.layers.confidence.clone().ok_or(ApiError::not_computed("confidence"))?,
            Layer::Uncertainty => sh.layers.uncertainty.clone().ok_or(ApiError::not_computed("uncertainty"))?,
        }
    };
    let png = blocking(move || -> ApiResult<Vec<u8>> {
        let (w, hgt, values) = slice_values(&vol, axis, q.index)?;
        let (dmin, dmax) = default_window(layer, vol.dtype(), &values);
        let pixels = window_to_u8(&values, q.min.unwrap_or(dmin), q.max.unwrap_or(dmax))?;
        Ok(encode_png(w, hgt, &pixels))
    })
    .await??;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "image/png")], png).into_response())
}

// ---------- seeds ----------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// Zero-based position of the entry in the request.
    pub entry: usize,
    pub pos: [usize; 3],
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedsDoc {
    pub accepted: usize,
    pub pending: usize,
    #[serde(default)]
    pub rejected: Vec<Rejection>,
}

async fn post_seeds(State(state): State<AppState>, Path(id): Path<u64>, body: String) -> ApiResult<Response> {
    let h = state.handle(id)?;
    let seeds = parse_seeds(&body)?;
    let mut sh = h.lock();
    if sh.phase != Phase::Idle {
        return Err(ApiError::busy());
    }
    let mut accepted = 0;
    let mut rejected = Vec::new();
    for (entry, seed) in seeds.into_iter().enumerate() {
        let reject = |code: &str, message: String| Rejection {
            entry,
            pos: seed.pos,
            code: code.into(),
            message,
        };
        let session = sh.session.as_ref().expect("idle sessions own their session");
        let verdict = session
            .check_seed(&seed)
            .and_then(|fresh| if fresh { sh.pending.check(&seed) } else { Ok(false) });
        match verdict {
            Ok(true) => {
                sh.pending.insert(seed).expect("checked above");
                accepted += 1;
            }
            Ok(false) => rejected.push(reject("duplicate", format!("seed at {:?} is already present", seed.pos))),
            Err(e) => rejected.push(reject(error_code(&e), e.to_string())),
        }
    }
    let doc = SeedsDoc {
        accepted,
        pending: sh.pending.len(),
        rejected,
    };
    Ok(toml_body(StatusCode::OK, &doc))
}

// ---------- iterations ----------

#[derive(Serialize)]
struct Started {
    iteration: u64,
    state: &'static str,
}

async fn iterate(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Response> {
    let h = state.handle(id)?;
    let next = {
        let sh = h.lock();
        if sh.phase != Phase::Idle {
            return Err(ApiError::busy());
        }
        let pos = sh.trained.iter().filter(|s| s.label > 0).count() + sh.pending.positives();
        let neg = sh.trained.len() + sh.pending.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(alseg::Error::SingleClass {
                positives: pos,
                negatives: neg,
            }
            .into());
        }
        sh.iteration + 1
    };
    start_job(h, true)?;
    Ok(toml_body(
        StatusCode::ACCEPTED,
        &Started {
            iteration: next,
            state: "training",
        },
    ))
}

/// Moves the session into a background job. With `train` the pending seeds
/// are trained on first; otherwise the current models are only applied.
fn start_job(h: Arc<Handle>, train: bool) -> ApiResult<()> {
    let (session, batch) = {
        let mut sh = h.lock();
        if sh.phase != Phase::Idle {
            return Err(ApiError::busy());
        }
        let session = sh.session.take().expect("idle sessions own their session");
        sh.phase = if train { Phase::Training } else { Phase::Classifying };
        sh.last_error = None;
        (session, sh.pending.entries().to_vec())
    };
    h.progress.begin_stage(0, 1, 1);
    tokio::task::spawn_blocking(move || run_job(h, session, batch, train));
    Ok(())
}

fn run_job(h: Arc<Handle>, mut session: Session, batch: Vec<Seed>, train: bool) {
    if train {
        if let Err(e) = session.train_iteration(&batch) {
            let mut sh = h.lock();
            sh.last_error = Some(e.into());
            sh.session = Some(session);
            sh.phase = Phase::Idle;
            return;
        }
        let mut sh = h.lock();
        sh.trained = session.seeds().entries().to_vec();
        sh.pending = SeedSet::new();
        sh.layers.models = model_bytes(&session);
        sh.phase = Phase::Classifying;
    }
    let result = session.segment(Some(&h.progress));
    let mut sh = h.lock();
    match result {
        Ok(out) => {
            if train {
                session.install(out);
            } else {
                session.refresh(out);
            }
            sh.layers.confidence = session.confidence().cloned();
            sh.layers.uncertainty = session.uncertainty().cloned();
            sh.iteration = session.iteration();
        }
        Err(e) => sh.last_error = Some(e.into()),
    }
    sh.session = Some(session);
    sh.phase = Phase::Idle;
}

fn model_bytes(session: &Session) -> Vec<Option<Vec<u8>>> {
    (1..=session.levels())
        .map(|l| {
            let state = session.level(l).ok()?;
            Some(model_to_bytes(state.model.as_ref()?, &state.training))
        })
        .collect()
}

// ---------- export and checkpoints ----------

#[derive(Debug, Deserialize)]
struct ExportQuery {
    what: String,
    /// `descriptor` returns the sidecar of a volume export.
    part: Option<String>,
    level: Option<usize>,
}

async fn export(State(state): State<AppState>, Path(id): Path<u64>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let h = state.handle(id)?;
    let sh = h.lock();
    let bytes = |b: Vec<u8>| (StatusCode::OK, [(header::CONTENT_TYPE, "application/octet-stream")], b).into_response();
    match q.what.as_str() {
        "seeds" => {
            let mut all = sh.trained.clone();
            all.extend_from_slice(sh.pending.entries());
            Ok((StatusCode::OK, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], emit_seeds(&all)).into_response())
        }
        "model" => {
            let level = q.level.unwrap_or(h.levels);
            let slot = level
                .checked_sub(1)
                .and_then(|i| sh.layers.models.get(i))
                .ok_or_else(|| ApiError::from(alseg::Error::InvalidLevel { level, max: h.levels }))?;
            Ok(bytes(slot.clone().ok_or(ApiError::not_computed("model"))?))
        }
        "confidence" | "uncertainty" => {
            let layer = if q.what == "confidence" {
                &sh.layers.confidence
            } else {
                &sh.layers.uncertainty
            };
            let vol = layer.clone().ok_or(ApiError::not_computed(&q.what))?;
            drop(sh);
            match q.part.as_deref() {
                Some("descriptor") => {
                    Ok((StatusCode::OK, [(header::CONTENT_TYPE, TOML_TYPE)], vol.meta().to_text()).into_response())
                }
                None | Some("data") => Ok(bytes(vol.to_samples()?.to_le_bytes())),
                Some(p) => Err(ApiError::bad_request(format!("unknown part {p:?}"))),
            }
        }
        other => Err(ApiError::bad_request(format!("cannot export {other:?}"))),
    }
}

#[derive(Debug, Deserialize)]
struct CheckpointRequest {
    dir: PathBuf,
}

#[derive(Serialize)]
struct Saved {
    dir: PathBuf,
    iteration: u64,
}

/// Writes a checkpoint of the trained state; pending seeds are not included.
async fn checkpoint(State(state): State<AppState>, Path(id): Path<u64>, body: String) -> ApiResult<Response> {
    let req: CheckpointRequest = parse_doc(&body)?;
    let h = state.handle(id)?;
    let sh = h.lock();
    let session = sh.session.as_ref().ok_or_else(ApiError::busy)?;
    session.save_checkpoint(&req.dir)?;
    let doc = Saved {
        dir: req.dir,
        iteration: session.iteration(),
    };
    Ok(toml_body(StatusCode::OK, &doc))
}
