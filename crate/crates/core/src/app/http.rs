//! JSON service for interactive editing sessions.
//!
//! Each session sits behind its own mutex; the session table is locked only
//! to look sessions up. Generation and metric computation run on the
//! blocking pool with no session lock held.

use std::collections::HashMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{generate_auto, AppError, ServiceConfig, Session};
use crate::dataset::Corpus;
use crate::encoder::{embed, EncoderParams, GraphInput};
use crate::metrics::{evaluate, CorruptionClassifier, EvalSample, MetricReport};
use crate::model::{from_records, parse_layout, serialize_layout, Canvas, LayoutGraph, ListingRecord};
use crate::relations::{derive_relations, ClearedEntry, Conflict, Edit, RelationMatrix};
use crate::synth::{insert_random_nodes, BackendRegistry, ConstraintMode, GenerationRequest, GenerationResult, SynthError, SOLVER_ID};

pub const DEFAULT_TOGGLES: usize = 3;

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

struct Slot {
    session: Mutex<Session>,
    generating: AtomicBool,
}

/// Clears the slot's generation flag when dropped.
struct Running<'a>(&'a AtomicBool);

impl Drop for Running<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    registry: BackendRegistry,
    corpus: Option<Corpus>,
    encoder: Option<EncoderParams>,
    extractor: Option<CorruptionClassifier>,
    snapshot_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(registry: BackendRegistry) -> Self {
        AppState {
            sessions: Mutex::new(HashMap::new()),
            registry,
            corpus: None,
            encoder: None,
            extractor: None,
            snapshot_dir: None,
        }
    }

    pub fn with_corpus(mut self, corpus: Corpus) -> Self {
        self.corpus = Some(corpus);
        self
    }

    pub fn with_encoder(mut self, params: EncoderParams) -> Self {
        self.encoder = Some(params);
        self
    }

    pub fn with_extractor(mut self, extractor: CorruptionClassifier) -> Self {
        self.extractor = Some(extractor);
        self
    }

    pub fn with_snapshot_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.snapshot_dir = Some(dir.into());
        self
    }

    /// Loads everything the config names and restores snapshotted sessions.
    pub fn from_config(cfg: &ServiceConfig, registry: BackendRegistry) -> Result<Self, AppError> {
        let mut state = AppState::new(registry);
        if let Some(p) = &cfg.corpus {
            state = state.with_corpus(Corpus::open(p)?);
        }
        if let Some(p) = &cfg.checkpoint {
            state = state.with_encoder(EncoderParams::load(p)?);
        }
        if let Some(p) = &cfg.classifier {
            let text = std::fs::read_to_string(p).map_err(AppError::io(p))?;
            state = state.with_extractor(CorruptionClassifier::from_json(&text)?);
        }
        if let Some(dir) = &cfg.snapshot_dir {
            state = state.with_snapshot_dir(dir);
            state.restore()?;
        }
        Ok(state)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table").len()
    }

    /// A copy of one session's current state.
    pub fn session(&self, id: &str) -> Option<Session> {
        let slot = self.sessions.lock().expect("session table").get(id).cloned()?;
        let s = slot.session.lock().expect("session").clone();
        Some(s)
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, AppError> {
        self.sessions
            .lock()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| AppError::UnknownSession(id.to_string()))
    }

    pub fn insert(&self, graph: LayoutGraph, relations: RelationMatrix) -> String {
        let mut table = self.sessions.lock().expect("session table");
        let id = loop {
            let id = format!("{:016x}", rand::random::<u64>());
            if !table.contains_key(&id) {
                break id;
            }
        };
        table.insert(id.clone(), Arc::new(slot(Session::new(id.clone(), graph, relations))));
        id
    }

    /// Writes every session to `<snapshot_dir>/<id>.json`.
    pub fn snapshot(&self) -> Result<usize, AppError> {
        let Some(dir) = &self.snapshot_dir else { return Ok(0) };
        std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
        let slots: Vec<Arc<Slot>> = self.sessions.lock().expect("session table").values().cloned().collect();
        for slot in &slots {
            let s = slot.session.lock().expect("session").clone();
            let path = dir.join(format!("{}.json", s.session_id));
            let text = serde_json::to_string(&s).expect("sessions serialize");
            std::fs::write(&path, text).map_err(AppError::io(&path))?;
        }
        Ok(slots.len())
    }

    fn restore(&self) -> Result<usize, AppError> {
        let Some(dir) = &self.snapshot_dir else { return Ok(0) };
        if !dir.exists() {
            return Ok(0);
        }
        let mut table = self.sessions.lock().expect("session table");
        for entry in std::fs::read_dir(dir).map_err(AppError::io(dir))? {
            let path = entry.map_err(AppError::io(dir))?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(AppError::io(&path))?;
            let s: Session = serde_json::from_str(&text)
                .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
            table.insert(s.session_id.clone(), Arc::new(slot(s)));
        }
        Ok(table.len())
    }
}

fn slot(session: Session) -> Slot {
    Slot {
        session: Mutex::new(session),
        generating: AtomicBool::new(false),
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, AppError> {
    serde_json::from_slice(body).map_err(|e| AppError::Malformed(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, AppError> + Send + 'static) -> Result<T, AppError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Internal(e.to_string()))?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub layout: LayoutGraph,
    pub relations: RelationMatrix,
    pub conflicts: Vec<Conflict>,
    pub edits: usize,
    #[serde(default)]
    pub generated: Option<GenerationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    pub relations: RelationMatrix,
    pub conflicts: Vec<Conflict>,
    pub cleared: Vec<ClearedEntry>,
    /// Batch positions of machine edits that human entries refused.
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizeResponse {
    pub relations: RelationMatrix,
    pub conflicts: Vec<Conflict>,
    pub applied: Vec<Edit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerateMode {
    Exact,
    Asserted,
    /// Exact first, asserted when the exact request is infeasible.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateBody {
    #[serde(default = "solver_id")]
    pub backend: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub insert_random: usize,
    #[serde(default)]
    pub mode: GenerateMode,
}

impl Default for GenerateBody {
    fn default() -> Self {
        GenerateBody {
            backend: solver_id(),
            seed: 0,
            insert_random: 0,
            mode: GenerateMode::Auto,
        }
    }
}

fn solver_id() -> String {
    SOLVER_ID.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizeBody {
    #[serde(default = "default_toggles")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_toggles() -> usize {
    DEFAULT_TOGGLES
}

/// A layout given either as graph JSON or as Listing records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutInput {
    Graph(LayoutGraph),
    Listing(Vec<ListingRecord>),
}

impl LayoutInput {
    fn into_graph(self) -> Result<LayoutGraph, AppError> {
        match self {
            LayoutInput::Graph(g) => Ok(g),
            LayoutInput::Listing(records) => Ok(from_records(records, Canvas::RICO)?.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBody {
    pub generated: Vec<LayoutInput>,
    pub reference: Vec<LayoutInput>,
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub dataset: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    #[serde(default)]
    corpus_id: Option<String>,
    #[serde(default)]
    listing: Option<serde_json::Value>,
    #[serde(default)]
    canvas: Option<Canvas>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EditBatch {
    List(Vec<Edit>),
    Wrapped { edits: Vec<Edit> },
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, AppError> {
    let value: serde_json::Value = parse(&body)?;
    let (graph, relations) = if value.is_array() {
        parse_layout(&value.to_string(), Canvas::RICO)?
    } else {
        let req: CreateBody = serde_json::from_value(value).map_err(|e| AppError::Malformed(e.to_string()))?;
        let canvas = req.canvas.unwrap_or(Canvas::RICO);
        match (req.corpus_id, req.listing) {
            (Some(id), None) => {
                let corpus = state
                    .corpus
                    .as_ref()
                    .ok_or_else(|| AppError::Malformed("the service has no corpus configured".into()))?;
                let entry = corpus
                    .find(&id)
                    .ok_or_else(|| AppError::Malformed(format!("corpus has no entry {id:?}")))?;
                let graph = corpus.load(entry)?;
                let relations = derive_relations(&graph);
                (graph, relations)
            }
            (None, Some(serde_json::Value::String(text))) => parse_layout(&text, canvas)?,
            (None, Some(listing)) => parse_layout(&listing.to_string(), canvas)?,
            _ => return Err(AppError::Malformed("give exactly one of corpus_id or listing".into())),
        }
    };
    let session_id = state.insert(graph, relations);
    Ok((StatusCode::CREATED, Json(CreatedSession { session_id })).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, AppError> {
    let slot = state.slot(&id)?;
    let s = slot.session.lock().expect("session");
    Ok(Json(SessionView {
        session_id: s.session_id.clone(),
        layout: s.graph.clone(),
        relations: s.relations.clone(),
        conflicts: s.conflicts(),
        edits: s.edit_log.len(),
        generated: s.generated.clone(),
    }))
}

async fn patch_relations(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EditResponse>, AppError> {
    let edits = match parse::<EditBatch>(&body)? {
        EditBatch::List(e) | EditBatch::Wrapped { edits: e } => e,
    };
    let slot = state.slot(&id)?;
    let mut s = slot.session.lock().expect("session");
    let report = s.apply(&edits)?;
    Ok(Json(EditResponse {
        relations: s.relations.clone(),
        conflicts: s.conflicts(),
        cleared: report.cleared,
        rejected: report.rejected,
    }))
}

async fn randomize(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<RandomizeResponse>, AppError> {
    let req: RandomizeBody = if body.iter().all(u8::is_ascii_whitespace) {
        RandomizeBody {
            count: DEFAULT_TOGGLES,
            seed: 0,
        }
    } else {
        parse(&body)?
    };
    let slot = state.slot(&id)?;
    let mut s = slot.session.lock().expect("session");
    let conflicts = s.conflicts();
    if !conflicts.is_empty() {
        return Err(SynthError::Conflicts(conflicts).into());
    }
    let report = s.randomize(req.count, req.seed);
    Ok(Json(RandomizeResponse {
        relations: s.relations.clone(),
        conflicts: s.conflicts(),
        applied: report.applied,
    }))
}

fn run_generation(
    registry: &BackendRegistry,
    base: GenerationRequest,
    mode: GenerateMode,
) -> Result<GenerationResult, AppError> {
    Ok(match mode {
        GenerateMode::Exact => registry.generate(&base.with_mode(ConstraintMode::Exact))?,
        GenerateMode::Asserted => registry.generate(&base.with_mode(ConstraintMode::Asserted))?,
        GenerateMode::Auto => generate_auto(registry, &base)?,
    })
}

async fn generate(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<GenerationResult>, AppError> {
    let req: GenerateBody = if body.iter().all(u8::is_ascii_whitespace) {
        GenerateBody::default()
    } else {
        parse(&body)?
    };
    let slot = state.slot(&id)?;
    if slot.generating.swap(true, Ordering::AcqRel) {
        return Err(AppError::Busy(id));
    }
    let worker = {
        let state = state.clone();
        let slot = slot.clone();
        move || {
            let _running = Running(&slot.generating);
            let (graph, relations) = {
                let s = slot.session.lock().expect("session");
                (s.graph.clone(), s.relations.clone())
            };
            let conflicts = crate::relations::validate(&relations);
            if !conflicts.is_empty() {
                return Err(SynthError::Conflicts(conflicts).into());
            }
            let mut base = GenerationRequest::new(relations.clone(), graph.canvas()).with_seed(req.seed);
            base.backend = req.backend.clone();
            base.known_categories = graph.nodes().iter().map(|n| (n.node_id, n.category)).collect();
            if let Some(params) = &state.encoder {
                let input = GraphInput::from_graph(&graph, &relations, params.config.stub_dim)?;
                base.embedding = Some(embed(&input, params)?.pooled);
            }
            let mut result = run_generation(&state.registry, base, req.mode)?;
            if req.insert_random > 0 {
                result = insert_random_nodes(&result, req.insert_random, req.seed);
            }
            let mut s = slot.session.lock().expect("session");
            if s.relations == relations {
                s.generated = Some(result.clone());
            }
            Ok(result)
        }
    };
    Ok(Json(blocking(worker).await?))
}

async fn export(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, AppError> {
    let slot = state.slot(&id)?;
    let text = {
        let s = slot.session.lock().expect("session");
        match &s.generated {
            Some(g) => serialize_layout(&g.layout, &g.relations_out)?,
            None => serialize_layout(&s.graph, &s.relations)?,
        }
    };
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn compare(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<MetricReport>, AppError> {
    let req: CompareBody = parse(&body)?;
    if req.generated.len() != req.reference.len() {
        return Err(AppError::Malformed(format!(
            "{} generated layouts against {} references",
            req.generated.len(),
            req.reference.len()
        )));
    }
    if req.generated.is_empty() {
        return Err(AppError::Malformed("no layouts to compare".into()));
    }
    let worker = move || {
        let samples = req
            .generated
            .into_iter()
            .zip(req.reference)
            .map(|(g, r)| {
                Ok(EvalSample {
                    generated: g.into_graph()?,
                    reference: r.into_graph()?,
                    target: None,
                })
            })
            .collect::<Result<Vec<_>, AppError>>()?;
        if samples.iter().any(|s| s.generated.len() != s.reference.len()) {
            return Err(AppError::Malformed("paired layouts must have equal node counts".into()));
        }
        let task = req.task.unwrap_or_else(|| "compare".into());
        let dataset = req.dataset.unwrap_or_else(|| "request".into());
        Ok(evaluate(&samples, state.extractor.as_ref(), &task, &dataset)?)
    };
    Ok(Json(blocking(worker).await?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/relations", patch(patch_relations))
        .route("/sessions/{id}/randomize", post(randomize))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/export", get(export))
        .route("/metrics/compare", post(compare))
        .with_state(state)
}

/// Serves until Ctrl-C, then snapshots sessions if configured.
pub async fn serve(cfg: &ServiceConfig, registry: BackendRegistry) -> Result<(), AppError> {
    let state = Arc::new(AppState::from_config(cfg, registry)?);
    let listener = tokio::net::TcpListener::bind(&cfg.listen)
        .await
        .map_err(AppError::io(FsPath::new(&cfg.listen)))?;
    eprintln!("listening on {}", cfg.listen);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(AppError::io(FsPath::new(&cfg.listen)))?;
    let n = state.snapshot()?;
    if n > 0 {
        eprintln!("wrote {n} session snapshots");
    }
    Ok(())
}
