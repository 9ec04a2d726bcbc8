//! HTTP/JSON front end for the annotation board.
//!
//! All mutations go through one mutex-guarded [`Workbench`], which writes
//! each event to the log (synced) before applying it to the board. A failed
//! write leaves the board untouched, so a restart from the log always
//! reproduces the acknowledged state.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dtmeasure_core::annotation::{Board, Label, Progress, Status};
use dtmeasure_core::corpus::Sentence;
use serde::{Deserialize, Serialize};

use crate::eventlog::EventLog;
use crate::formats;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub bind: String,
    pub event_log: PathBuf,
    pub pool: PathBuf,
    pub sentences: PathBuf,
    #[serde(default)]
    pub annotator_token: Option<String>,
    #[serde(default)]
    pub adjudicator_token: Option<String>,
}

/// Bearer tokens. A role whose token is unset is open; the adjudicator
/// token is also accepted wherever the annotator token is.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tokens {
    pub annotator: Option<String>,
    pub adjudicator: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Annotator,
    Adjudicator,
}

impl Tokens {
    fn allows(&self, headers: &HeaderMap, role: Role) -> bool {
        let presented = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim);
        let is = |t: &Option<String>| matches!((t, presented), (Some(t), Some(p)) if t == p);
        match role {
            Role::Annotator => self.annotator.is_none() || is(&self.annotator) || is(&self.adjudicator),
            Role::Adjudicator => self.adjudicator.is_none() || is(&self.adjudicator),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SentenceInfo {
    text: String,
    firm_id: String,
    year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextResponse {
    pub sentence_id: String,
    pub text: String,
    pub firm_id: String,
    pub year: i32,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub sentence_id: String,
    pub annotator: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelResponse {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeItem {
    pub sentence_id: String,
    pub text: String,
    pub label_a: Label,
    pub label_b: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicateRequest {
    pub sentence_id: String,
    pub resolution: String,
    /// Recorded as the event's annotator id; defaults to "adjudicator".
    #[serde(default)]
    pub adjudicator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicateResponse {
    pub status: Status,
}

fn now_millis() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// Board, event log and sentence texts behind the service.
#[derive(Debug)]
pub struct Workbench {
    board: Board,
    log: EventLog,
    sentences: HashMap<String, SentenceInfo>,
}

impl Workbench {
    /// Opens the event log at `log_path` and replays it over `pool`.
    pub fn open(pool: Vec<String>, sentences: &[Sentence], log_path: &Path) -> Result<Self> {
        let texts: HashMap<String, SentenceInfo> = sentences
            .iter()
            .map(|s| {
                (
                    s.sentence_id.clone(),
                    SentenceInfo {
                        text: s.text.clone(),
                        firm_id: s.firm_id.clone(),
                        year: s.year,
                    },
                )
            })
            .collect();
        if let Some(id) = pool.iter().find(|id| !texts.contains_key(*id)) {
            return Err(Error::validation(format!("pool sentence {id} has no text")));
        }
        let (log, events) = EventLog::open(log_path)?;
        let board = Board::replay(pool, &events)?;
        log::info!("replayed {} events from {}", events.len(), log_path.display());
        Ok(Workbench {
            board,
            log,
            sentences: texts,
        })
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self> {
        let pool = formats::read_pool(&cfg.pool)?;
        let sentences: Vec<Sentence> = formats::read_jsonl(&cfg.sentences)?;
        Self::open(pool, &sentences, &cfg.event_log)
    }

    pub fn board(&self) -> &Board {
        &self.board
    }

    pub fn next(&mut self, annotator: &str) -> Option<NextResponse> {
        let a = self.board.assign_next(annotator)?;
        let info = &self.sentences[&a.sentence_id];
        Some(NextResponse {
            text: info.text.clone(),
            firm_id: info.firm_id.clone(),
            year: info.year,
            sentence_id: a.sentence_id,
            remaining: a.remaining,
        })
    }

    pub fn label(&mut self, sentence_id: &str, annotator: &str, label: Label) -> Result<LabelResponse> {
        let ev = self.board.prepare_label(sentence_id, annotator, label, now_millis())?;
        self.log.append(&ev)?;
        let state = self.board.commit(ev);
        Ok(LabelResponse {
            status: state.status,
            final_label: state.final_label,
        })
    }

    pub fn adjudicate(&mut self, sentence_id: &str, adjudicator: &str, resolution: Label) -> Result<AdjudicateResponse> {
        let ev = self
            .board
            .prepare_adjudication(sentence_id, adjudicator, resolution, now_millis())?;
        self.log.append(&ev)?;
        Ok(AdjudicateResponse {
            status: self.board.commit(ev).status,
        })
    }

    pub fn disputes(&self) -> Vec<DisputeItem> {
        self.board
            .disputes()
            .into_iter()
            .map(|d| DisputeItem {
                text: self.sentences[&d.sentence_id].text.clone(),
                sentence_id: d.sentence_id,
                label_a: d.label_a,
                label_b: d.label_b,
            })
            .collect()
    }

    pub fn progress(&self) -> Progress {
        self.board.progress()
    }
}

#[derive(Clone)]
struct AppState {
    bench: Arc<Mutex<Workbench>>,
    tokens: Arc<Tokens>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn reply(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: message.into() })).into_response()
}

fn error_response(e: Error) -> Response {
    use dtmeasure_core::Error as Core;
    let status = match &e {
        Error::Core(Core::Transition { .. }) => StatusCode::CONFLICT,
        Error::Core(Core::UnknownIds(_)) => StatusCode::NOT_FOUND,
        Error::Core(_) | Error::Validation(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    if status == StatusCode::INTERNAL_SERVER_ERROR {
        log::error!("{e}");
    }
    reply(status, e.to_string())
}

fn parse_label(s: &str) -> std::result::Result<Label, Response> {
    s.parse::<Label>()
        .map_err(|e| reply(StatusCode::BAD_REQUEST, e.to_string()))
}

fn unauthorized() -> Response {
    reply(StatusCode::UNAUTHORIZED, "missing or invalid bearer token")
}

fn lock(state: &AppState) -> std::sync::MutexGuard<'_, Workbench> {
    // A panic while holding the lock cannot leave the board ahead of the
    // log (events are logged first), so the state stays usable.
    state.bench.lock().unwrap_or_else(|p| p.into_inner())
}

async fn next(State(state): State<AppState>, headers: HeaderMap, Query(q): Query<HashMap<String, String>>) -> Response {
    if !state.tokens.allows(&headers, Role::Annotator) {
        return unauthorized();
    }
    let Some(annotator) = q.get("annotator").map(|a| a.trim()).filter(|a| !a.is_empty()) else {
        return reply(StatusCode::BAD_REQUEST, "missing annotator parameter");
    };
    match lock(&state).next(annotator) {
        Some(body) => Json(body).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn label(State(state): State<AppState>, headers: HeaderMap, Json(req): Json<LabelRequest>) -> Response {
    if !state.tokens.allows(&headers, Role::Annotator) {
        return unauthorized();
    }
    let label = match parse_label(&req.label) {
        Ok(l) => l,
        Err(r) => return r,
    };
    match lock(&state).label(&req.sentence_id, &req.annotator, label) {
        Ok(body) => Json(body).into_response(),
        Err(e) => error_response(e),
    }
}

async fn disputes(State(state): State<AppState>, headers: HeaderMap) -> Response {
    if !state.tokens.allows(&headers, Role::Adjudicator) {
        return unauthorized();
    }
    Json(lock(&state).disputes()).into_response()
}

async fn adjudicate(State(state): State<AppState>, headers: HeaderMap, Json(req): Json<AdjudicateRequest>) -> Response {
    if !state.tokens.allows(&headers, Role::Adjudicator) {
        return unauthorized();
    }
    let resolution = match parse_label(&req.resolution) {
        Ok(l) => l,
        Err(r) => return r,
    };
    let who = req.adjudicator.as_deref().unwrap_or("adjudicator");
    match lock(&state).adjudicate(&req.sentence_id, who, resolution) {
        Ok(body) => Json(body).into_response(),
        Err(e) => error_response(e),
    }
}

async fn progress(State(state): State<AppState>) -> Response {
    Json(lock(&state).progress()).into_response()
}

pub fn router(bench: Arc<Mutex<Workbench>>, tokens: Tokens) -> Router {
    Router::new()
        .route("/next", get(next))
        .route("/label", post(label))
        .route("/disputes", get(disputes))
        .route("/adjudicate", post(adjudicate))
        .route("/progress", get(progress))
        .with_state(AppState {
            bench,
            tokens: Arc::new(tokens),
        })
}

/// Runs the service until Ctrl-C.
pub fn serve(cfg: &ServiceConfig) -> Result<()> {
    let bench = Arc::new(Mutex::new(Workbench::from_config(cfg)?));
    let tokens = Tokens {
        annotator: cfg.annotator_token.clone(),
        adjudicator: cfg.adjudicator_token.clone(),
    };
    let app = router(bench, tokens);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .map_err(|e| Error::io(&cfg.bind, e))?;
        log::info!("annotation service listening on {}", cfg.bind);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(&cfg.bind, e))
    })
}
