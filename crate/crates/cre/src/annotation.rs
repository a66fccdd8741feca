//! Annotation service: durable label log plus the HTTP API.
//!
//! Every accepted event is appended to an NDJSON log and synced before it is
//! applied, so the in-memory state can always be rebuilt by replaying the
//! log. A torn final line (a crash mid-write) is dropped on open.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use cre_core::annotate::{
    parse_label, AnnotateError, AnnotationRecord, LabelLedger, LogEvent, Submission, Timestamp,
};
use cre_core::miner::Task;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::InstanceRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum LogLine {
    Label {
        instance_id: String,
        annotator_id: String,
        label: u8,
        guideline_version: String,
        timestamp: DateTime<Utc>,
    },
    Reopen {
        instance_id: String,
        timestamp: DateTime<Utc>,
    },
    Resolve {
        instance_id: String,
        label: u8,
        resolver: String,
        timestamp: DateTime<Utc>,
    },
}

fn to_datetime(ts: Timestamp) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(ts.0).unwrap_or_default()
}

fn to_timestamp(dt: DateTime<Utc>) -> Timestamp {
    Timestamp(dt.timestamp_millis())
}

impl From<&LogEvent> for LogLine {
    fn from(e: &LogEvent) -> Self {
        match e {
            LogEvent::Label(r) => LogLine::Label {
                instance_id: r.instance_id.clone(),
                annotator_id: r.annotator_id.clone(),
                label: r.label.into(),
                guideline_version: r.guideline_version.clone(),
                timestamp: to_datetime(r.timestamp),
            },
            LogEvent::Reopen {
                instance_id,
                timestamp,
            } => LogLine::Reopen {
                instance_id: instance_id.clone(),
                timestamp: to_datetime(*timestamp),
            },
            LogEvent::Resolve {
                instance_id,
                label,
                resolver,
                timestamp,
            } => LogLine::Resolve {
                instance_id: instance_id.clone(),
                label: (*label).into(),
                resolver: resolver.clone(),
                timestamp: to_datetime(*timestamp),
            },
        }
    }
}

impl TryFrom<LogLine> for LogEvent {
    type Error = AnnotateError;

    fn try_from(line: LogLine) -> std::result::Result<Self, AnnotateError> {
        Ok(match line {
            LogLine::Label {
                instance_id,
                annotator_id,
                label,
                guideline_version,
                timestamp,
            } => LogEvent::Label(AnnotationRecord {
                instance_id,
                annotator_id,
                label: parse_label(label.into())?,
                timestamp: to_timestamp(timestamp),
                guideline_version,
            }),
            LogLine::Reopen {
                instance_id,
                timestamp,
            } => LogEvent::Reopen {
                instance_id,
                timestamp: to_timestamp(timestamp),
            },
            LogLine::Resolve {
                instance_id,
                label,
                resolver,
                timestamp,
            } => LogEvent::Resolve {
                instance_id,
                label: parse_label(label.into())?,
                resolver,
                timestamp: to_timestamp(timestamp),
            },
        })
    }
}

pub fn event_line(event: &LogEvent) -> String {
    let mut s = serde_json::to_string(&LogLine::from(event)).expect("event serializes");
    s.push('\n');
    s
}

/// Parses a log. Returns the events and the byte length of the intact prefix.
pub fn parse_log(bytes: &[u8], path: &Path) -> Result<(Vec<LogEvent>, usize)> {
    let mut events = Vec::new();
    let mut offset = 0;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let (line, next, complete) = match bytes[offset..].iter().position(|&b| b == b'\n') {
            Some(i) => (&bytes[offset..offset + i], offset + i + 1, true),
            None => (&bytes[offset..], bytes.len(), false),
        };
        if line.iter().all(u8::is_ascii_whitespace) {
            offset = next;
            continue;
        }
        if !complete {
            // Never acknowledged: the append that wrote it did not finish.
            log::warn!("{}: dropping torn final line {line_no}", path.display());
            return Ok((events, offset));
        }
        let event = serde_json::from_slice::<LogLine>(line)
            .map_err(|e| e.to_string())
            .and_then(|l| LogEvent::try_from(l).map_err(|e| e.to_string()))
            .map_err(|e| Error::record(path, line_no, e))?;
        events.push(event);
        offset = next;
    }
    Ok((events, offset))
}

/// Append-only NDJSON event log.
pub struct AnnotationLog {
    path: PathBuf,
    file: File,
}

impl AnnotationLog {
    /// Opens (creating if needed) and replays the log, cutting off a torn tail.
    pub fn open(path: &Path) -> Result<(Self, Vec<LogEvent>)> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(path, e)),
        };
        let (events, intact) = parse_log(&bytes, path)?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if intact < bytes.len() {
            file.set_len(intact as u64)
                .map_err(|e| Error::io(path, e))?;
            file.seek(SeekFrom::End(0))
                .map_err(|e| Error::io(path, e))?;
        }
        Ok((
            AnnotationLog {
                path: path.into(),
                file,
            },
            events,
        ))
    }

    pub fn append(&mut self, event: &LogEvent) -> Result<()> {
        let io = |e| Error::io(&self.path, e);
        self.file
            .write_all(event_line(event).as_bytes())
            .map_err(io)?;
        self.file.flush().map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}

/// Loads a log without opening it for writing.
pub fn read_log(path: &Path) -> Result<Vec<LogEvent>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_log(&bytes, path)?.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRequest {
    pub instance_id: String,
    pub annotator_id: String,
    pub label: i64,
    #[serde(default)]
    pub guideline_version: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ack {
    Appended,
    Duplicate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelAck {
    pub status: Ack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjudicationAction {
    Resolve,
    Reopen,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjudicationRequest {
    pub instance_id: String,
    pub action: AdjudicationAction,
    #[serde(default)]
    pub label: Option<i64>,
    #[serde(default)]
    pub resolver: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NextTask {
    pub task: InstanceRecord,
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Progress {
    pub tasks: usize,
    pub annotators: BTreeMap<String, usize>,
    pub agreed: usize,
    pub conflicted: usize,
    pub single: usize,
    pub resolved: usize,
    pub unlabeled: usize,
    pub panel_agreement: Option<f64>,
    pub pairwise_agreement: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conflicts {
    pub conflicts: Vec<InstanceRecord>,
}

/// Ledger plus log. Callers serialize access (the HTTP layer holds a mutex).
pub struct AnnotationService {
    ledger: LabelLedger,
    log: AnnotationLog,
    guideline_version: String,
    last_timestamp: Timestamp,
}

impl AnnotationService {
    pub fn open(tasks: Vec<Task>, log_path: &Path, guideline_version: &str) -> Result<Self> {
        let (log, events) = AnnotationLog::open(log_path)?;
        let last_timestamp = events
            .iter()
            .map(|e| match e {
                LogEvent::Label(r) => r.timestamp,
                LogEvent::Reopen { timestamp, .. } | LogEvent::Resolve { timestamp, .. } => {
                    *timestamp
                }
            })
            .max()
            .unwrap_or(Timestamp(0));
        log::info!(
            "replayed {} event(s) from {}",
            events.len(),
            log_path.display()
        );
        Ok(AnnotationService {
            ledger: LabelLedger::replay(tasks, events)?,
            log,
            guideline_version: guideline_version.into(),
            last_timestamp,
        })
    }

    pub fn ledger(&self) -> &LabelLedger {
        &self.ledger
    }

    /// Wall clock, never earlier than the last logged event.
    fn now(&mut self) -> Timestamp {
        let t = Timestamp(Utc::now().timestamp_millis()).max(self.last_timestamp);
        self.last_timestamp = t;
        t
    }

    fn commit(&mut self, event: LogEvent) -> Result<()> {
        self.log.append(&event)?;
        self.ledger.apply(event)?;
        Ok(())
    }

    pub fn next_task(&self, annotator_id: &str) -> Option<NextTask> {
        self.ledger.next_task(annotator_id).map(|t| NextTask {
            task: InstanceRecord::from_task(t),
            done: self.ledger.progress(annotator_id),
            total: self.ledger.tasks().len(),
        })
    }

    pub fn submit_label(&mut self, req: LabelRequest) -> Result<Ack> {
        let label = parse_label(req.label)?;
        // Unknown ids are rejected before a timestamp is drawn.
        if self.ledger.task(&req.instance_id).is_none() {
            return Err(AnnotateError::UnknownInstance(req.instance_id).into());
        }
        let record = AnnotationRecord {
            instance_id: req.instance_id,
            annotator_id: req.annotator_id,
            label,
            timestamp: self.now(),
            guideline_version: req
                .guideline_version
                .unwrap_or_else(|| self.guideline_version.clone()),
        };
        match self.ledger.check_label(record)? {
            Submission::Duplicate => Ok(Ack::Duplicate),
            Submission::Append(event) => {
                self.commit(event)?;
                Ok(Ack::Appended)
            }
        }
    }

    pub fn adjudicate(&mut self, req: AdjudicationRequest) -> Result<()> {
        let ts = self.now();
        let event = match req.action {
            AdjudicationAction::Reopen => self.ledger.check_reopen(&req.instance_id, ts)?,
            AdjudicationAction::Resolve => {
                let label = req
                    .label
                    .ok_or_else(|| Error::Usage("resolve needs a `label`".into()))?;
                let resolver = req.resolver.unwrap_or_default();
                if resolver.is_empty() {
                    return Err(Error::Usage("resolve needs a `resolver`".into()));
                }
                self.ledger
                    .check_resolve(&req.instance_id, parse_label(label)?, &resolver, ts)?
            }
        };
        self.commit(event)
    }

    pub fn progress(&self) -> Progress {
        let adj = self.ledger.adjudicate();
        Progress {
            tasks: self.ledger.tasks().len(),
            annotators: self
                .ledger
                .annotators()
                .into_iter()
                .map(|a| (a.to_string(), self.ledger.progress(a)))
                .collect(),
            agreed: adj.agreed,
            conflicted: adj.conflicted,
            single: adj.single,
            resolved: adj.resolved,
            unlabeled: adj.unlabeled,
            panel_agreement: adj.panel_agreement,
            pairwise_agreement: adj.pairwise_agreement,
        }
    }

    pub fn conflicts(&self) -> Conflicts {
        Conflicts {
            conflicts: self
                .ledger
                .adjudicate()
                .conflicts
                .iter()
                .filter_map(|id| self.ledger.task(id))
                .map(InstanceRecord::from_task)
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// HTTP

pub type SharedService = Arc<Mutex<AnnotationService>>;

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Annotate(AnnotateError::UnknownInstance(_)) => StatusCode::NOT_FOUND,
            Error::Annotate(AnnotateError::NonBinaryLabel(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Annotate(AnnotateError::NotConflicted(_)) => StatusCode::CONFLICT,
            Error::Annotate(AnnotateError::EmptyAnnotator) | Error::Usage(_) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{e}");
        }
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

async fn next_task(State(svc): State<SharedService>, Query(q): Query<NextQuery>) -> Response {
    let annotator = match q.annotator.filter(|a| !a.is_empty()) {
        Some(a) => a,
        None => {
            return ApiError(StatusCode::BAD_REQUEST, "missing `annotator`".into()).into_response()
        }
    };
    let next = svc.lock().expect("service lock").next_task(&annotator);
    match next {
        Some(t) => Json(t).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn post_label(
    State(svc): State<SharedService>,
    Json(req): Json<LabelRequest>,
) -> std::result::Result<Json<LabelAck>, ApiError> {
    let status = svc.lock().expect("service lock").submit_label(req)?;
    Ok(Json(LabelAck { status }))
}

async fn progress(State(svc): State<SharedService>) -> Json<Progress> {
    Json(svc.lock().expect("service lock").progress())
}

async fn conflicts(State(svc): State<SharedService>) -> Json<Conflicts> {
    Json(svc.lock().expect("service lock").conflicts())
}

async fn post_adjudication(
    State(svc): State<SharedService>,
    Json(req): Json<AdjudicationRequest>,
) -> std::result::Result<StatusCode, ApiError> {
    svc.lock().expect("service lock").adjudicate(req)?;
    Ok(StatusCode::OK)
}

/// The API routes; static files from `static_dir` are served for any other path.
pub fn router(service: SharedService, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/v1/tasks/next", get(next_task))
        .route("/v1/labels", post(post_label))
        .route("/v1/progress", get(progress))
        .route("/v1/conflicts", get(conflicts))
        .route("/v1/adjudications", post(post_adjudication))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until Ctrl-C.
pub fn serve(
    addr: SocketAddr,
    service: AnnotationService,
    static_dir: Option<&Path>,
) -> Result<()> {
    let app = router(Arc::new(Mutex::new(service)), static_dir);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<runtime>", e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(addr.to_string(), e))?;
        log::info!("annotation service listening on {}", addr);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(addr.to_string(), e))
    })
}
