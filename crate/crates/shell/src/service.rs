//! Local HTTP service over a single document.
//!
//! Mutations are serialized by one lock and may carry an expected
//! `?revision=N`; reads are answered from the last published snapshot.

use std::convert::Infallible;
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use cageforge_core::cage::generate::CageOptions;
use cageforge_core::cage::CoordinateMethod;
use cageforge_core::fitting::FitOptions;
use cageforge_core::mesh::io::{parse_mesh, MeshFormat};
use cageforge_core::mesh::slice::Plane;
use cageforge_core::solver::SolverOptions;
use cageforge_core::Mesh;
use nalgebra::Vector3;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, Mutex};
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use crate::document::{Document, Frame, Snapshot};
use crate::error::{ErrorKind, ShellError};
use crate::ops::{landmark_set, LandmarkEntry, MoveRequest};
use crate::pipeline::slice_record;

#[derive(Clone)]
pub struct AppState {
    doc: Arc<Mutex<Document>>,
    snapshot: Arc<RwLock<Arc<Snapshot>>>,
    frames: broadcast::Sender<Frame>,
}

impl Default for AppState {
    fn default() -> Self {
        let doc = Document::new();
        let snapshot = Arc::new(RwLock::new(Arc::new(doc.snapshot())));
        Self {
            doc: Arc::new(Mutex::new(doc)),
            snapshot,
            frames: broadcast::channel(64).0,
        }
    }
}

impl AppState {
    fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }
}

pub enum ApiError {
    Conflict { expected: u64, current: u64 },
    Engine(ShellError),
}

impl From<ShellError> for ApiError {
    fn from(e: ShellError) -> Self {
        ApiError::Engine(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::Conflict { expected, current } => (
                StatusCode::CONFLICT,
                Json(json!({"error": "RevisionConflict", "expected": expected, "current": current})),
            )
                .into_response(),
            ApiError::Engine(e) => {
                let status = match e.kind {
                    ErrorKind::Usage => StatusCode::BAD_REQUEST,
                    _ => StatusCode::UNPROCESSABLE_ENTITY,
                };
                (status, Json(json!({"error": e.name, "message": e.message}))).into_response()
            }
        }
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

#[derive(Debug, Default, Deserialize)]
pub struct Expect {
    revision: Option<u64>,
}

/// Response body of a mutation; `stream` also pushes the new frame.
struct Outcome {
    body: Value,
    stream: bool,
}

impl Outcome {
    fn revision(r: u64) -> Self {
        Self {
            body: json!({"revision": r}),
            stream: false,
        }
    }
}

/// Run `f` under the document lock, off the async workers, then publish.
async fn mutate<F>(state: &AppState, expect: Expect, f: F) -> ApiResult
where
    F: FnOnce(&mut Document) -> crate::error::Result<Outcome> + Send + 'static,
{
    let mut guard = state.doc.clone().lock_owned().await;
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let doc = &mut *guard;
        if let Some(expected) = expect.revision {
            if expected != doc.revision() {
                return Err(ApiError::Conflict {
                    expected,
                    current: doc.revision(),
                });
            }
        }
        let before = doc.revision();
        let outcome = f(doc)?;
        if doc.revision() != before {
            let snapshot = Arc::new(doc.snapshot());
            if outcome.stream {
                // no receivers is not an error
                let _ = state.frames.send(snapshot.frame.clone());
            }
            *state.snapshot.write().expect("snapshot lock poisoned") = snapshot;
        }
        Ok(Json(outcome.body))
    })
    .await
    .map_err(|e| ShellError::new(ErrorKind::Numerical, "Panic", e.to_string()))?
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/doc", get(get_doc))
        .route("/doc/vertices", get(get_vertices))
        .route("/doc/annotations", get(get_annotations))
        .route("/doc/graph", get(get_graph))
        .route("/mesh", post(post_mesh))
        .route("/cage", post(post_cage))
        .route("/annotations", post(post_annotations))
        .route("/graph", post(post_graph))
        .route("/bind", post(post_bind))
        .route("/session", post(post_session).delete(delete_session))
        .route("/handles/select", post(post_select))
        .route("/handles/move", post(post_move))
        .route("/stream", get(stream))
        .route("/slice", get(get_slice))
        .route("/fit", post(post_fit))
        .with_state(state)
}

pub fn app() -> Router {
    router(AppState::default())
}

pub async fn serve(host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn get_doc(State(s): State<AppState>) -> Json<Value> {
    Json(s.current().summary.clone())
}

async fn get_vertices(State(s): State<AppState>) -> Json<Frame> {
    Json(s.current().frame.clone())
}

async fn get_annotations(State(s): State<AppState>) -> Json<Value> {
    Json(s.current().annotations.clone())
}

async fn get_graph(State(s): State<AppState>) -> Json<Value> {
    Json(s.current().graph.clone())
}

/// A mesh given inline as text or base64, or as a local path.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSource {
    format: Option<String>,
    text: Option<String>,
    base64: Option<String>,
    path: Option<String>,
}

impl MeshSource {
    fn load(&self) -> crate::error::Result<Mesh> {
        let format = |f: &Option<String>| -> crate::error::Result<MeshFormat> {
            Ok(f.as_deref().ok_or_else(|| ShellError::invalid("Schema", "inline meshes need a format"))?.parse()?)
        };
        match (&self.text, &self.base64, &self.path) {
            (Some(t), None, None) => Ok(parse_mesh(t.as_bytes(), format(&self.format)?)?),
            (None, Some(b), None) => {
                let bytes = STANDARD.decode(b).map_err(|e| ShellError::invalid("Schema", format!("base64: {e}")))?;
                Ok(parse_mesh(&bytes, format(&self.format)?)?)
            }
            (None, None, Some(p)) => {
                let f = self.format.as_deref().map(str::parse).transpose()?;
                Ok(cageforge_core::mesh::io::load_mesh(p, f)?)
            }
            _ => Err(ShellError::invalid("Schema", "give exactly one of text, base64 or path")),
        }
    }
}

async fn post_mesh(State(s): State<AppState>, Query(e): Query<Expect>, Json(src): Json<MeshSource>) -> ApiResult {
    mutate(&s, e, move |d| {
        let mesh = src.load()?;
        Ok(Outcome::revision(d.set_template(mesh)?))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CageBody {
    Generate { generate: GenerateParams },
    Load(MeshSource),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct GenerateParams {
    offset: Option<f64>,
    faces: Option<usize>,
    cells_per_offset: Option<usize>,
}

async fn post_cage(State(s): State<AppState>, Query(e): Query<Expect>, Json(body): Json<CageBody>) -> ApiResult {
    mutate(&s, e, move |d| match body {
        CageBody::Load(src) => Ok(Outcome::revision(d.set_cage(src.load()?)?)),
        CageBody::Generate { generate: g } => {
            let defaults = CageOptions::default();
            let options = CageOptions {
                offset_fraction: g.offset.unwrap_or(defaults.offset_fraction),
                target_faces: g.faces.unwrap_or(defaults.target_faces),
                cells_per_offset: g.cells_per_offset.unwrap_or(defaults.cells_per_offset),
            };
            let (revision, violations) = d.generate_cage(&options)?;
            Ok(Outcome {
                body: json!({"revision": revision, "violations": violations}),
                stream: false,
            })
        }
    })
    .await
}

async fn post_annotations(State(s): State<AppState>, Query(e): Query<Expect>, Json(doc): Json<Value>) -> ApiResult {
    mutate(&s, e, move |d| Ok(Outcome::revision(d.set_annotations(&doc.to_string())?))).await
}

async fn post_graph(State(s): State<AppState>, Query(e): Query<Expect>, Json(doc): Json<Value>) -> ApiResult {
    mutate(&s, e, move |d| Ok(Outcome::revision(d.set_graph(&doc.to_string())?))).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindBody {
    method: String,
}

pub fn parse_method(s: &str) -> crate::error::Result<CoordinateMethod> {
    match s.to_ascii_lowercase().as_str() {
        "mvc" => Ok(CoordinateMethod::MeanValue),
        "gc" => Ok(CoordinateMethod::Green),
        other => CoordinateMethod::from_title(s).ok_or_else(|| ShellError::invalid("Schema", format!("unknown coordinate method '{other}'"))),
    }
}

async fn post_bind(State(s): State<AppState>, Query(e): Query<Expect>, Json(body): Json<BindBody>) -> ApiResult {
    mutate(&s, e, move |d| Ok(Outcome::revision(d.bind(parse_method(&body.method)?)?))).await
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SessionBody {
    pins: Option<Vec<usize>>,
    iters: Option<usize>,
    tol: Option<f64>,
    pin_weight_factor: Option<f64>,
}

impl SessionBody {
    fn options(&self) -> SolverOptions<f64> {
        let d = SolverOptions::default();
        SolverOptions {
            max_iterations: self.iters.unwrap_or(d.max_iterations),
            tolerance: self.tol.unwrap_or(d.tolerance),
            pin_weight_factor: self.pin_weight_factor.unwrap_or(d.pin_weight_factor),
            ..d
        }
    }
}

async fn post_session(State(s): State<AppState>, Query(e): Query<Expect>, body: Option<Json<SessionBody>>) -> ApiResult {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    mutate(&s, e, move |d| {
        let options = body.options();
        Ok(Outcome::revision(d.build_session(body.pins, options)?))
    })
    .await
}

async fn delete_session(State(s): State<AppState>, Query(e): Query<Expect>) -> ApiResult {
    mutate(&s, e, move |d| {
        let changed = d.withdraw()?.is_some();
        Ok(Outcome {
            body: json!({"revision": d.revision(), "withdrawn": changed}),
            stream: changed,
        })
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SelectBody {
    Indices { indices: Vec<usize> },
    Annotation { annotation: u64, threshold: Option<f64> },
}

async fn post_select(State(s): State<AppState>, Query(e): Query<Expect>, Json(body): Json<SelectBody>) -> ApiResult {
    mutate(&s, e, move |d| {
        let revision = match body {
            SelectBody::Indices { indices } => d.select(indices)?,
            SelectBody::Annotation { annotation, threshold } => d.select_annotation(annotation, threshold)?,
        };
        Ok(Outcome {
            body: json!({"revision": revision, "selection": d.selection()}),
            stream: false,
        })
    })
    .await
}

async fn post_move(State(s): State<AppState>, Query(e): Query<Expect>, Json(body): Json<MoveRequest>) -> ApiResult {
    mutate(&s, e, move |d| {
        d.move_handles(&body)?;
        Ok(Outcome {
            body: serde_json::to_value(d.frame()).expect("frames serialize"),
            stream: true,
        })
    })
    .await
}

/// Server-sent `frame` events, one per accepted move.
async fn stream(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let frames = BroadcastStream::new(s.frames.subscribe()).filter_map(|f| {
        // lagging receivers skip frames instead of holding up writers
        f.ok()
            .map(|frame| Ok(Event::default().event("frame").id(frame.revision.to_string()).json_data(frame).expect("frames serialize")))
    });
    Sse::new(frames).keep_alive(KeepAlive::default())
}

#[derive(Debug, Deserialize)]
pub struct SliceQuery {
    /// `nx,ny,nz,offset`.
    plane: String,
    step: Option<f64>,
    pruning: Option<f64>,
}

pub fn parse_plane(text: &str) -> crate::error::Result<Plane<f64>> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| ShellError::invalid("Schema", format!("plane '{text}': {e}")))?;
    match v[..] {
        [x, y, z, d] => Ok(Plane::new(Vector3::new(x, y, z), d)?),
        _ => Err(ShellError::invalid("Schema", format!("plane '{text}' needs 4 numbers"))),
    }
}

pub const DEFAULT_PRUNING_DEG: f64 = 30.0;

async fn get_slice(State(s): State<AppState>, Query(q): Query<SliceQuery>) -> ApiResult {
    let snap = s.current();
    let template = snap.template.clone().ok_or_else(|| ShellError::invalid("MissingState", "the document has no template"))?;
    let plane = parse_plane(&q.plane)?;
    let record = tokio::task::spawn_blocking(move || slice_record(&template, plane, q.step, q.pruning.unwrap_or(DEFAULT_PRUNING_DEG)))
        .await
        .map_err(|e| ShellError::new(ErrorKind::Numerical, "Panic", e.to_string()))??;
    let mut body = json!({"revision": snap.revision});
    body.as_object_mut().expect("object").extend(record.as_object().expect("object").clone());
    Ok(Json(body))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct FitBody {
    fragment: MeshSource,
    annotations: Value,
    landmarks: Option<Vec<LandmarkEntry>>,
    fit_weight: Option<f64>,
    dist_cap: Option<f64>,
    normal_deg: Option<f64>,
    outer_iters: Option<usize>,
}

async fn post_fit(State(s): State<AppState>, Query(e): Query<Expect>, Json(body): Json<FitBody>) -> ApiResult {
    mutate(&s, e, move |d| {
        let fragment = Document::parse_fragment(&body.annotations.to_string(), body.fragment.load()?)?;
        let landmarks = body.landmarks.as_deref().map(landmark_set).transpose()?;
        let f = FitOptions::default();
        let options = FitOptions {
            fit_weight: body.fit_weight.unwrap_or(f.fit_weight),
            distance_cap: body.dist_cap.unwrap_or(f.distance_cap),
            normal_degrees: body.normal_deg.unwrap_or(f.normal_degrees),
            max_outer_iterations: body.outer_iters.unwrap_or(f.max_outer_iterations),
            ..f
        };
        let (revision, report) = d.fit(fragment, landmarks, SolverOptions::default(), options)?;
        Ok(Outcome {
            body: json!({"revision": revision, "report": report}),
            stream: true,
        })
    })
    .await
}
