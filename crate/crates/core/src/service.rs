//! HTTP + JSON facade over sessions, with a server-sent event stream.
//!
//! ```text
//! GET  /personas
//! POST /sessions                          {persona_id, options?, seed?} -> 201 {session_id}
//! GET  /sessions/{id}
//! POST /sessions/{id}/turns               {text} -> Turn
//! GET  /sessions/{id}/turns/{n}/peek      -> DeliberationRecord
//! GET  /sessions/{id}/events              -> text/event-stream of ApiEvent
//! ```

use std::collections::{HashMap, VecDeque};
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::construct::ConstructId;
use crate::construct::{load_persona_file, PersonaConfig};
use crate::engine::{EngineOptions, RoundSnapshot};
use crate::session::{
    DeliberationRecord, Session, SessionError, SessionRuntime, SessionStore, Turn, TurnEvent,
};
use crate::synth::BehaviorCategory;

pub const HEARTBEAT_INTERVAL: Duration = Duration::from_secs(15);
const EVENT_BUFFER: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSummary {
    pub turn_index: u32,
    pub category: BehaviorCategory,
    pub consensus_score: f64,
    pub dominant_agent: ConstructId,
    pub utterance: String,
    pub template_id: String,
}

impl From<&Turn> for TurnSummary {
    fn from(turn: &Turn) -> Self {
        TurnSummary {
            turn_index: turn.turn_index,
            category: turn.outcome.category,
            consensus_score: turn.outcome.consensus_score,
            dominant_agent: turn.outcome.dominant_agent.clone(),
            utterance: turn.outcome.utterance.clone(),
            template_id: turn.outcome.template_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum ApiEventBody {
    TurnStarted { user_text: String },
    RoundCompleted(RoundSnapshot),
    TurnCompleted(TurnSummary),
}

impl ApiEventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            ApiEventBody::TurnStarted { .. } => "turn_started",
            ApiEventBody::RoundCompleted(_) => "round_completed",
            ApiEventBody::TurnCompleted(_) => "turn_completed",
        }
    }
}

/// One `data:` line of the event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEvent {
    /// Per-session sequence number, increasing.
    pub seq: u64,
    pub session_id: String,
    pub turn_index: u32,
    #[serde(flatten)]
    pub body: ApiEventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSummary {
    pub persona_id: String,
    pub description: String,
    pub constructs: Vec<ConstructId>,
    pub deliberation_rounds: u8,
}

/// Persona files in `dir`, ordered by persona id. Unreadable directories
/// and malformed files are skipped with a warning.
pub fn list_personas(dir: &Path) -> Vec<PersonaConfig> {
    let entries = match std::fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) => {
            tracing::warn!(dir = %dir.display(), error = %e, "cannot read personas directory");
            return Vec::new();
        }
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut personas: Vec<PersonaConfig> = paths
        .into_iter()
        .filter_map(|path| match load_persona_file(&path) {
            Ok(p) => Some(p),
            Err(e) => {
                tracing::warn!(file = %path.display(), error = %e, "skipping persona file");
                None
            }
        })
        .collect();
    personas.sort_by(|a, b| a.persona_id.cmp(&b.persona_id));
    personas
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub personas_dir: PathBuf,
    pub sessions_dir: PathBuf,
    pub options: EngineOptions,
}

struct SessionSlot {
    session: Arc<tokio::sync::Mutex<Session>>,
    events: broadcast::Sender<ApiEvent>,
    /// Events of the turn currently being processed; replayed to late subscribers.
    in_progress: Mutex<Vec<ApiEvent>>,
    seq: AtomicU64,
}

impl SessionSlot {
    fn new(session: Session) -> Self {
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        SessionSlot {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            events,
            in_progress: Mutex::new(Vec::new()),
            seq: AtomicU64::new(0),
        }
    }

    fn emit(&self, session_id: &str, turn_index: u32, body: ApiEventBody) {
        let done = matches!(body, ApiEventBody::TurnCompleted(_));
        let mut buffer = self.in_progress.lock().expect("event buffer poisoned");
        if matches!(body, ApiEventBody::TurnStarted { .. }) {
            buffer.clear();
        }
        let event = ApiEvent {
            seq: self.seq.fetch_add(1, Ordering::SeqCst) + 1,
            session_id: session_id.to_string(),
            turn_index,
            body,
        };
        let _ = self.events.send(event.clone());
        if done {
            buffer.clear();
        } else {
            buffer.push(event);
        }
    }

    fn subscribe(&self) -> (Vec<ApiEvent>, broadcast::Receiver<ApiEvent>) {
        let buffer = self.in_progress.lock().expect("event buffer poisoned");
        (buffer.clone(), self.events.subscribe())
    }
}

pub struct AppState {
    config: ServiceConfig,
    runtime: SessionRuntime,
    store: SessionStore,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig, runtime: SessionRuntime) -> Arc<Self> {
        let store = SessionStore::new(config.sessions_dir.clone());
        Arc::new(AppState {
            config,
            runtime,
            store,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn slot(&self, session_id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let mut sessions = self.sessions.lock().expect("session map poisoned");
        if let Some(slot) = sessions.get(session_id) {
            return Ok(slot.clone());
        }
        let well_formed = !session_id.is_empty()
            && session_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !well_formed || !self.store.path_for(session_id).exists() {
            return Err(ApiError::NotFound(format!(
                "unknown session `{session_id}`"
            )));
        }
        let session = self
            .store
            .load(session_id)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        let slot = Arc::new(SessionSlot::new(session));
        sessions.insert(session_id.to_string(), slot.clone());
        Ok(slot)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (
            status,
            Json(serde_json::json!({ "error": self.to_string() })),
        )
            .into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::UnknownTurn(_) => ApiError::NotFound(e.to_string()),
            SessionError::EmptyText
            | SessionError::InvalidPersona(_)
            | SessionError::InvalidOptions(_) => ApiError::BadRequest(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

async fn get_personas(State(state): State<Arc<AppState>>) -> Json<Vec<PersonaSummary>> {
    let catalog = list_personas(&state.config.personas_dir)
        .into_iter()
        .map(|p| PersonaSummary {
            constructs: p
                .canonicalized()
                .constructs
                .into_iter()
                .map(|c| c.id)
                .collect(),
            persona_id: p.persona_id,
            description: p.description,
            deliberation_rounds: p.deliberation_rounds,
        })
        .collect();
    Json(catalog)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub persona_id: String,
    #[serde(default)]
    pub options: Option<EngineOptions>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
}

async fn create_session_endpoint(
    State(state): State<Arc<AppState>>,
    Json(request): Json<CreateSessionRequest>,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let persona = list_personas(&state.config.personas_dir)
        .into_iter()
        .find(|p| p.persona_id == request.persona_id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown persona `{}`", request.persona_id)))?;
    let mut builder =
        Session::builder(persona).options(request.options.unwrap_or(state.config.options));
    if let Some(seed) = request.seed {
        builder = builder.seed(seed);
    }
    let session = builder.build()?;
    state.store.save(&session)?;
    let session_id = session.session_id.clone();
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .insert(session_id.clone(), Arc::new(SessionSlot::new(session)));
    Ok((
        StatusCode::CREATED,
        Json(CreateSessionResponse { session_id }),
    ))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Session>, ApiError> {
    let slot = state.slot(&id)?;
    let session = slot.session.lock().await;
    Ok(Json(session.clone()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostTurnRequest {
    pub text: String,
}

async fn post_turn(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(request): Json<PostTurnRequest>,
) -> Result<Json<Turn>, ApiError> {
    let slot = state.slot(&id)?;
    if request.text.trim().is_empty() {
        return Err(SessionError::EmptyText.into());
    }
    let mut session =
        slot.session.clone().try_lock_owned().map_err(|_| {
            ApiError::Conflict(format!("a turn is already running on session `{id}`"))
        })?;
    let worker_state = state.clone();
    let worker_slot = slot.clone();
    let turn = tokio::task::spawn_blocking(move || -> Result<Turn, ApiError> {
        let session_id = session.session_id.clone();
        let turn = session
            .run_turn_observed(
                &worker_state.runtime,
                &request.text,
                &mut |event| match event {
                    TurnEvent::Started {
                        turn_index,
                        user_text,
                    } => worker_slot.emit(
                        &session_id,
                        turn_index,
                        ApiEventBody::TurnStarted {
                            user_text: user_text.to_string(),
                        },
                    ),
                    TurnEvent::RoundCompleted {
                        turn_index,
                        snapshot,
                    } => worker_slot.emit(
                        &session_id,
                        turn_index,
                        ApiEventBody::RoundCompleted(snapshot.clone()),
                    ),
                    // sent after the session is persisted
                    TurnEvent::Completed { .. } => {}
                },
            )?
            .clone();
        worker_state.store.save(&session)?;
        worker_slot.emit(
            &session_id,
            turn.turn_index,
            ApiEventBody::TurnCompleted((&turn).into()),
        );
        Ok(turn)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(turn))
}

async fn get_peek(
    State(state): State<Arc<AppState>>,
    UrlPath((id, turn_index)): UrlPath<(String, u32)>,
) -> Result<Json<DeliberationRecord>, ApiError> {
    let slot = state.slot(&id)?;
    let session = slot.session.lock().await;
    Ok(Json(session.peek(turn_index)?))
}

fn to_sse(event: &ApiEvent) -> Event {
    Event::default()
        .event(event.body.kind())
        .data(serde_json::to_string(event).expect("event serializes"))
}

async fn event_stream(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let slot = state.slot(&id)?;
    let (backlog, rx) = slot.subscribe();
    let backlog: VecDeque<ApiEvent> = backlog.into();
    let events = stream::unfold((backlog, rx), |(mut backlog, mut rx)| async move {
        if let Some(event) = backlog.pop_front() {
            return Some((Ok(to_sse(&event)), (backlog, rx)));
        }
        loop {
            match rx.recv().await {
                Ok(event) => return Some((Ok(to_sse(&event)), (backlog, rx))),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(skipped = n, "event subscriber lagged");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(events).keep_alive(
        KeepAlive::new()
            .interval(HEARTBEAT_INTERVAL)
            .text("heartbeat"),
    ))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/personas", get(get_personas))
        .route("/sessions", post(create_session_endpoint))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/turns/{n}/peek", get(get_peek))
        .route("/sessions/{id}/events", get(event_stream))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state)).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_wire_format() {
        let event = ApiEvent {
            seq: 1,
            session_id: "s".into(),
            turn_index: 2,
            body: ApiEventBody::TurnStarted {
                user_text: "hi".into(),
            },
        };
        let v = serde_json::to_value(&event).unwrap();
        assert_eq!(v["kind"], "turn_started");
        assert_eq!(v["payload"]["user_text"], "hi");
        assert_eq!(v["turn_index"], 2);
        let back: ApiEvent = serde_json::from_value(v).unwrap();
        assert_eq!(back, event);
    }

    #[test]
    fn missing_directory_gives_empty_catalog() {
        assert!(list_personas(Path::new("/definitely/not/here")).is_empty());
    }
}
