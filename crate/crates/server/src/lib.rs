//! HTTP/JSON service exposing segmentation sessions to a browser front end.
//!
//! Every mutating request maps to exactly one session operation. Steps run
//! as background jobs polled through `/jobs/{job}`; reads are served from a
//! snapshot refreshed after each operation, so they never wait for a job.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use fomtrace_core::eval::SequenceReport;
use fomtrace_core::imgcore::{encode_label_png, encode_rgb8_png, load_frame_sequence, load_mask, mask_file_name};
use fomtrace_core::pipeline::{AcceptOutcome, PipelineError, SessionConfig, Stroke};
use fomtrace_core::{Frame, LabelMap, Session};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::Unprocessable(r.body_text())
    }
}

/// Maps session errors to the status of the request that caused them.
fn pipeline_error(e: PipelineError) -> ApiError {
    match e {
        PipelineError::NothingToAccept(_)
        | PipelineError::NotStepped(_)
        | PipelineError::Finished
        | PipelineError::AlreadyStarted => ApiError::Conflict(e.to_string()),
        PipelineError::EmptyInitialMask
        | PipelineError::TooFewFrames(_)
        | PipelineError::DimensionMismatch { .. }
        | PipelineError::InvalidConfig(_)
        | PipelineError::Image(_) => ApiError::Unprocessable(e.to_string()),
        other => ApiError::Internal(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub session_id: String,
    pub state: JobState,
    pub progress: f64,
    pub message: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub frames_dir: PathBuf,
    pub init_mask: PathBuf,
    #[serde(default)]
    pub config: SessionConfig,
    #[serde(default)]
    pub flow_dir: Option<PathBuf>,
    /// Ground-truth masks (`mask_%05d.png`) to score the report against.
    #[serde(default)]
    pub gt_dir: Option<PathBuf>,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScribbleRequest {
    pub t: usize,
    pub strokes: Vec<Stroke>,
    #[serde(default)]
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub t: usize,
    pub done: bool,
    pub stepped: bool,
    pub paused: bool,
    pub busy: bool,
    pub config: SessionConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    #[default]
    Refined,
    Predicted,
    Accepted,
}

#[derive(Debug, Deserialize)]
pub struct MaskQuery {
    #[serde(default)]
    pub kind: MaskKind,
}

/// Read-only view of a session, refreshed after every operation.
#[derive(Default)]
struct Snapshot {
    t: usize,
    done: bool,
    stepped: bool,
    paused: bool,
    config: SessionConfig,
    accepted: Vec<Option<LabelMap>>,
    predicted: Vec<Option<LabelMap>>,
    refined: Vec<Option<LabelMap>>,
    models: Vec<Option<Vec<u8>>>,
    report: Option<SequenceReport>,
}

struct SessionEntry {
    id: String,
    name: String,
    frames: Arc<Vec<Frame>>,
    ground_truth: Option<Vec<LabelMap>>,
    session: Mutex<Session>,
    busy: AtomicBool,
    snapshot: RwLock<Snapshot>,
}

/// Marks a session busy for the guard's lifetime.
struct BusyGuard(Arc<SessionEntry>);

impl BusyGuard {
    fn acquire(entry: &Arc<SessionEntry>) -> Result<Self, ApiError> {
        entry
            .busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| ApiError::Conflict(format!("session {} has an operation in flight", entry.id)))?;
        Ok(Self(entry.clone()))
    }
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

impl SessionEntry {
    fn refresh(&self, s: &Session) {
        let n = s.frame_count();
        let snap = Snapshot {
            t: s.current(),
            done: s.is_done(),
            stepped: s.is_stepped(),
            paused: s.is_paused(),
            config: s.config().clone(),
            accepted: (0..n).map(|t| s.accepted(t).cloned()).collect(),
            predicted: (0..n).map(|t| s.predicted(t).cloned()).collect(),
            refined: (0..n).map(|t| s.refined(t).cloned()).collect(),
            models: (0..n).map(|t| s.model(t).map(|m| m.to_png())).collect(),
            report: s
                .report(&self.name, self.ground_truth.as_deref())
                .map_err(|e| log::warn!("session {}: report unavailable: {e}", self.id))
                .ok(),
        };
        *self.snapshot.write().expect("snapshot lock") = snap;
    }
}

struct Inner {
    data_dir: PathBuf,
    persist: bool,
    sessions: Mutex<HashMap<String, Arc<SessionEntry>>>,
    jobs: Mutex<HashMap<String, JobStatus>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

/// Shared service state. Relative paths in requests resolve against the data
/// directory; sessions are saved under `<data>/sessions/<id>` after every
/// change when persistence is on.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            inner: Arc::new(Inner {
                data_dir: data_dir.into(),
                persist: true,
                sessions: Mutex::new(HashMap::new()),
                jobs: Mutex::new(HashMap::new()),
                next_session: AtomicU64::new(1),
                next_job: AtomicU64::new(1),
            }),
        }
    }

    /// Same as [`AppState::new`] without writing session directories.
    pub fn in_memory(data_dir: impl Into<PathBuf>) -> Self {
        let mut s = Self::new(data_dir);
        Arc::get_mut(&mut s.inner).expect("fresh state").persist = false;
        s
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.inner.data_dir.join(p)
        }
    }

    fn entry(&self, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
        self.inner
            .sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
    }

    fn set_job(&self, job: JobStatus) {
        self.inner.jobs.lock().expect("jobs lock").insert(job.job_id.clone(), job);
    }

    fn update_job(&self, id: &str, f: impl FnOnce(&mut JobStatus)) {
        if let Some(j) = self.inner.jobs.lock().expect("jobs lock").get_mut(id) {
            f(j);
        }
    }

    fn persist(&self, entry: &SessionEntry, s: &Session) {
        if self.inner.persist {
            let dir = self.inner.data_dir.join("sessions").join(&entry.id);
            if let Err(e) = s.save(&dir) {
                log::warn!("session {}: could not save to {}: {e}", entry.id, dir.display());
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/config", post(update_config))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/scribbles", post(scribbles))
        .route("/sessions/{id}/accept", post(accept))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/frames/{file}", get(frame_png))
        .route("/sessions/{id}/masks/{file}", get(mask_png))
        .route("/sessions/{id}/model/{file}", get(model_png))
        .route("/jobs/{job}", get(job_status))
        .with_state(state)
}

/// Binds `0.0.0.0:port` and serves until the process ends.
pub async fn serve(port: u16, data_dir: PathBuf) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(data_dir))).await
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

/// Parses `"{t}.png"`.
fn frame_index(file: &str) -> Result<usize, ApiError> {
    file.strip_suffix(".png")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ApiError::NotFound(format!("no such image {file}")))
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body?;
    let frames_dir = state.resolve(&req.frames_dir);
    let init_mask = state.resolve(&req.init_mask);
    let flow_dir = req.flow_dir.as_deref().map(|p| state.resolve(p));
    let gt_dir = req.gt_dir.as_deref().map(|p| state.resolve(p));
    let config = req.config;
    let (frames, session, gt) = blocking(move || -> Result<_, ApiError> {
        let bad = |e: &dyn std::fmt::Display| ApiError::Unprocessable(e.to_string());
        let frames = Arc::new(load_frame_sequence::<f64>(&frames_dir).map_err(|e| bad(&e))?);
        let l0 = load_mask(&init_mask).map_err(|e| bad(&e))?;
        let gt = gt_dir
            .map(|d| {
                (0..frames.len())
                    .map(|t| load_mask(&d.join(mask_file_name(t))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()
            .map_err(|e| bad(&e))?;
        let session = Session::init_shared(frames.clone(), l0, config)
            .map_err(pipeline_error)?
            .with_flow_dir(flow_dir);
        Ok((frames, session, gt))
    })
    .await??;
    let id = format!("s{}", state.inner.next_session.fetch_add(1, Ordering::Relaxed));
    let entry = Arc::new(SessionEntry {
        name: req.name.unwrap_or_else(|| id.clone()),
        id: id.clone(),
        frames,
        ground_truth: gt,
        session: Mutex::new(session),
        busy: AtomicBool::new(false),
        snapshot: RwLock::new(Snapshot::default()),
    });
    {
        let s = entry.session.lock().expect("session lock");
        entry.refresh(&s);
        state.persist(&entry, &s);
    }
    state.inner.sessions.lock().expect("sessions lock").insert(id.clone(), entry);
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "session_id": id }))))
}

async fn session_summary(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionSummary>, ApiError> {
    let entry = state.entry(&id)?;
    let snap = entry.snapshot.read().expect("snapshot lock");
    let (width, height) = entry.frames[0].dims();
    Ok(Json(SessionSummary {
        session_id: entry.id.clone(),
        name: entry.name.clone(),
        width,
        height,
        frame_count: entry.frames.len(),
        t: snap.t,
        done: snap.done,
        stepped: snap.stepped,
        paused: snap.paused,
        busy: entry.busy.load(Ordering::Acquire),
        config: snap.config.clone(),
    }))
}

async fn update_config(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<SessionConfig>, JsonRejection>,
) -> Result<Json<SessionConfig>, ApiError> {
    let entry = state.entry(&id)?;
    let Json(config) = body?;
    let guard = BusyGuard::acquire(&entry)?;
    let mut s = entry.session.lock().expect("session lock");
    s.set_config(config).map_err(pipeline_error)?;
    entry.refresh(&s);
    state.persist(&entry, &s);
    drop(guard);
    Ok(Json(s.config().clone()))
}

async fn step(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let entry = state.entry(&id)?;
    let guard = BusyGuard::acquire(&entry)?;
    if entry.snapshot.read().expect("snapshot lock").done {
        return Err(ApiError::Conflict("every frame has been accepted".into()));
    }
    let job_id = format!("j{}", state.inner.next_job.fetch_add(1, Ordering::Relaxed));
    let job = JobStatus {
        job_id: job_id.clone(),
        session_id: id,
        state: JobState::Queued,
        progress: 0.0,
        message: String::new(),
    };
    state.set_job(job.clone());
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        st.update_job(&job_id, |j| j.state = JobState::Running);
        let mut s = entry.session.lock().expect("session lock");
        let mut progress = |p: f64| st.update_job(&job_id, |j| j.progress = p.clamp(0.0, 1.0));
        let outcome = s.step_with(&mut progress).map(|_| ());
        entry.refresh(&s);
        state.persist(&entry, &s);
        let paused = s.is_paused();
        drop(s);
        // Free the session before reporting completion so a client that sees
        // `done` can mutate right away.
        drop(guard);
        st.update_job(&job_id, |j| match outcome {
            Ok(()) => {
                j.state = JobState::Done;
                j.progress = 1.0;
                j.message = if paused {
                    "the model lost the object; add object scribbles or accept the empty label".into()
                } else {
                    "refined".into()
                };
            }
            Err(e) => {
                j.state = JobState::Failed;
                j.message = e.to_string();
            }
        });
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn job_status(
    State(state): State<AppState>,
    UrlPath(job): UrlPath<String>,
) -> Result<Json<JobStatus>, ApiError> {
    state
        .inner
        .jobs
        .lock()
        .expect("jobs lock")
        .get(&job)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("unknown job {job}")))
}

async fn scribbles(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ScribbleRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let entry = state.entry(&id)?;
    let Json(req) = body?;
    if !(req.elapsed_s >= 0.0 && req.elapsed_s.is_finite()) {
        return Err(ApiError::Unprocessable(format!("elapsed_s {} is not a duration", req.elapsed_s)));
    }
    let guard = BusyGuard::acquire(&entry)?;
    {
        let snap = entry.snapshot.read().expect("snapshot lock");
        if req.t != snap.t || !snap.stepped {
            return Err(ApiError::Conflict(format!(
                "frame {} is not awaiting corrections (current frame {}, stepped: {})",
                req.t, snap.t, snap.stepped
            )));
        }
    }
    let st = state.clone();
    let bytes = blocking(move || {
        let _guard = guard;
        let mut s = entry.session.lock().expect("session lock");
        let out = s.correct(&req.strokes, req.elapsed_s).map(encode_label_png);
        entry.refresh(&s);
        st.persist(&entry, &s);
        out
    })
    .await?
    .map_err(pipeline_error)?;
    Ok(png(bytes))
}

async fn accept(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let entry = state.entry(&id)?;
    let guard = BusyGuard::acquire(&entry)?;
    let mut s = entry.session.lock().expect("session lock");
    let outcome = s.accept().map_err(pipeline_error)?;
    entry.refresh(&s);
    state.persist(&entry, &s);
    drop(guard);
    Ok(Json(match outcome {
        AcceptOutcome::Next(t) => serde_json::json!({ "t": t, "done": false }),
        AcceptOutcome::Done => serde_json::json!({ "t": s.current(), "done": true }),
    }))
}

async fn report(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SequenceReport>, ApiError> {
    let entry = state.entry(&id)?;
    let snap = entry.snapshot.read().expect("snapshot lock");
    snap.report
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::Internal("report unavailable".into()))
}

async fn frame_png(
    State(state): State<AppState>,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let entry = state.entry(&id)?;
    let t = frame_index(&file)?;
    let frame = entry
        .frames
        .get(t)
        .ok_or_else(|| ApiError::NotFound(format!("no frame {t}")))?
        .clone();
    Ok(png(blocking(move || encode_rgb8_png(&frame.to_rgb8())).await?))
}

async fn mask_png(
    State(state): State<AppState>,
    UrlPath((id, file)): UrlPath<(String, String)>,
    Query(q): Query<MaskQuery>,
) -> Result<Response, ApiError> {
    let entry = state.entry(&id)?;
    let t = frame_index(&file)?;
    let snap = entry.snapshot.read().expect("snapshot lock");
    let slot = match q.kind {
        MaskKind::Refined => &snap.refined,
        MaskKind::Predicted => &snap.predicted,
        MaskKind::Accepted => &snap.accepted,
    };
    let label = slot
        .get(t)
        .and_then(Option::as_ref)
        .ok_or_else(|| ApiError::NotFound(format!("no {:?} mask for frame {t}", q.kind).to_lowercase()))?;
    Ok(png(encode_label_png(label)))
}

async fn model_png(
    State(state): State<AppState>,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let entry = state.entry(&id)?;
    let t = frame_index(&file)?;
    let snap = entry.snapshot.read().expect("snapshot lock");
    let bytes = snap
        .models
        .get(t)
        .and_then(Clone::clone)
        .ok_or_else(|| ApiError::NotFound(format!("no model for frame {t}")))?;
    Ok(png(bytes))
}
