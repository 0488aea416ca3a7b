//! One frame-loop thread owns the session. Handlers talk to it through a
//! channel: reads are answered at the start of the next frame, inputs are
//! queued into the session and acknowledged once that frame has applied
//! them. Every frame is published to `/stream` subscribers.

use std::collections::VecDeque;
use std::convert::Infallible;
use std::sync::mpsc::{self, TryRecvError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::{broadcast, oneshot};

use paintbox_core::engine::{Ack, FrameReport, Input, Mode, Session};
use paintbox_core::rendering::{encode_png, Motion};
use paintbox_core::scene::Rgb;

#[derive(Clone, Copy, Debug)]
enum Query {
    State,
    Labels,
    ForestStats,
    Png,
}

enum Request {
    Query(Query, oneshot::Sender<Reply>),
    Inputs(Vec<Input>, oneshot::Sender<Vec<Result<Ack, String>>>),
}

enum Reply {
    Json(Value),
    Png(Option<Vec<u8>>),
}

/// What `/stream` subscribers receive per frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StreamFrame {
    pub report: FrameReport,
    /// Base64 PNG of the composited frame.
    pub png: String,
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("engine thread has stopped")]
    EngineGone,
    #[error("{0}")]
    Rejected(String),
}

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        let status = match self {
            ServerError::EngineGone => StatusCode::SERVICE_UNAVAILABLE,
            ServerError::Rejected(_) => StatusCode::BAD_REQUEST,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

/// Cloneable handle to a running frame loop.
#[derive(Clone)]
pub struct EngineHandle {
    tx: mpsc::Sender<Request>,
    frames: broadcast::Sender<Arc<StreamFrame>>,
}

impl EngineHandle {
    async fn query(&self, q: Query) -> Result<Reply, ServerError> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(Request::Query(q, tx)).map_err(|_| ServerError::EngineGone)?;
        rx.await.map_err(|_| ServerError::EngineGone)
    }

    async fn json(&self, q: Query) -> Result<Json<Value>, ServerError> {
        match self.query(q).await? {
            Reply::Json(v) => Ok(Json(v)),
            Reply::Png(_) => unreachable!("json query answered with an image"),
        }
    }

    /// Queues `inputs` for the next frame and waits for their acks.
    pub async fn submit(&self, inputs: Vec<Input>) -> Result<Vec<Result<Ack, String>>, ServerError> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(Request::Inputs(inputs, tx)).map_err(|_| ServerError::EngineGone)?;
        rx.await.map_err(|_| ServerError::EngineGone)
    }

    /// Submits inputs and answers with the last ack, or the first failure.
    async fn ack(&self, inputs: Vec<Input>) -> Result<Json<Ack>, ServerError> {
        let acks = self.submit(inputs).await?;
        let mut last = None;
        for a in acks {
            last = Some(a.map_err(ServerError::Rejected)?);
        }
        last.map(Json).ok_or_else(|| ServerError::Rejected("no input".into()))
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<StreamFrame>> {
        self.frames.subscribe()
    }
}

/// Starts the frame loop. It runs at most `fps` frames per second and stops
/// once every handle is dropped, returning the session.
pub fn spawn_engine(session: Session, fps: f64) -> (EngineHandle, JoinHandle<Session>) {
    let (tx, rx) = mpsc::channel();
    let (frames, _) = broadcast::channel(8);
    let publish = frames.clone();
    let period = Duration::from_secs_f64(1.0 / fps.max(0.1));
    let join = std::thread::Builder::new()
        .name("paintbox-frame-loop".into())
        .spawn(move || frame_loop(session, rx, publish, period))
        .expect("spawn frame loop");
    (EngineHandle { tx, frames }, join)
}

type Waiting = VecDeque<(usize, oneshot::Sender<Vec<Result<Ack, String>>>)>;

fn frame_loop(
    mut session: Session,
    rx: mpsc::Receiver<Request>,
    publish: broadcast::Sender<Arc<StreamFrame>>,
    period: Duration,
) -> Session {
    // inputs stay queued in the session across a failed (rolled back) frame,
    // so their responders wait for the next frame that succeeds
    let mut waiting: Waiting = VecDeque::new();
    loop {
        let start = Instant::now();
        loop {
            match rx.try_recv() {
                Ok(Request::Query(q, reply)) => {
                    let _ = reply.send(answer(&session, q));
                }
                Ok(Request::Inputs(inputs, reply)) => {
                    waiting.push_back((inputs.len(), reply));
                    inputs.into_iter().for_each(|i| session.enqueue(i));
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return session,
            }
        }
        match session.frame() {
            Ok(report) => {
                let mut acks = report.acks.clone().into_iter();
                while let Some((n, reply)) = waiting.pop_front() {
                    let _ = reply.send(acks.by_ref().take(n).collect());
                }
                if publish.receiver_count() > 0 {
                    let png = session.last_image().and_then(|f| encode_png(f).ok()).unwrap_or_default();
                    let png = base64::engine::general_purpose::STANDARD.encode(png);
                    let _ = publish.send(Arc::new(StreamFrame { report, png }));
                }
            }
            Err(e) => tracing::warn!("frame {} failed and was rolled back: {e}", session.frame_number()),
        }
        if let Some(rest) = period.checked_sub(start.elapsed()) {
            std::thread::sleep(rest);
        }
    }
}

fn answer(s: &Session, q: Query) -> Reply {
    let v = match q {
        Query::State => serde_json::to_value(s.state()),
        Query::Labels => serde_json::to_value(s.scene().label_table()),
        Query::ForestStats => serde_json::to_value(s.forest_stats()),
        Query::Png => return Reply::Png(s.last_image().and_then(|f| encode_png(f).ok())),
    };
    Reply::Json(v.expect("API types serialise"))
}

#[derive(Deserialize)]
struct CommandBody {
    text: String,
}

#[derive(Deserialize)]
struct PickBody {
    x: usize,
    y: usize,
    #[serde(default)]
    radius: Option<u32>,
    /// Label name to select before marking.
    #[serde(default)]
    label: Option<String>,
}

#[derive(Deserialize)]
struct CameraBody {
    motion: Motion,
}

#[derive(Deserialize)]
struct ModeBody {
    mode: String,
}

#[derive(Deserialize)]
struct LabelBody {
    name: String,
    color: Rgb,
}

async fn get_state(State(h): State<EngineHandle>) -> Result<Json<Value>, ServerError> {
    h.json(Query::State).await
}

async fn get_labels(State(h): State<EngineHandle>) -> Result<Json<Value>, ServerError> {
    h.json(Query::Labels).await
}

async fn get_forest_stats(State(h): State<EngineHandle>) -> Result<Json<Value>, ServerError> {
    h.json(Query::ForestStats).await
}

async fn get_frame_png(State(h): State<EngineHandle>) -> Result<Response, ServerError> {
    match h.query(Query::Png).await? {
        Reply::Png(Some(png)) => Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response()),
        _ => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn post_command(State(h): State<EngineHandle>, Json(b): Json<CommandBody>) -> Result<Json<Ack>, ServerError> {
    h.ack(vec![Input::Command { text: b.text }]).await
}

async fn post_pick(State(h): State<EngineHandle>, Json(b): Json<PickBody>) -> Result<Json<Ack>, ServerError> {
    let mut inputs = Vec::new();
    if let Some(name) = b.label {
        inputs.push(Input::Command { text: format!("label {name}") });
    }
    inputs.push(Input::Pick { x: b.x, y: b.y, radius: b.radius });
    h.ack(inputs).await
}

async fn post_camera(State(h): State<EngineHandle>, Json(b): Json<CameraBody>) -> Result<Json<Ack>, ServerError> {
    h.ack(vec![Input::Camera { motion: b.motion }]).await
}

async fn post_mode(State(h): State<EngineHandle>, Json(b): Json<ModeBody>) -> Result<Json<Ack>, ServerError> {
    let mode: Mode = b.mode.parse().map_err(|e: paintbox_core::engine::CommandParseError| ServerError::Rejected(e.to_string()))?;
    h.ack(vec![Input::SetMode { mode }]).await
}

async fn post_labels(State(h): State<EngineHandle>, Json(b): Json<LabelBody>) -> Result<Json<Ack>, ServerError> {
    h.ack(vec![Input::AddLabel { name: b.name, color: b.color }]).await
}

async fn stream(State(h): State<EngineHandle>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = h.subscribe();
    let events = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(f) => {
                    let ev = Event::default().event("frame").json_data(&*f).expect("frame serialises");
                    return Some((Ok(ev), rx));
                }
                // a slow client skips frames rather than seeing stale ones
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}

pub fn router(handle: EngineHandle) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/command", post(post_command))
        .route("/pick", post(post_pick))
        .route("/camera", post(post_camera))
        .route("/mode", post(post_mode))
        .route("/labels", get(get_labels).post(post_labels))
        .route("/forest/stats", get(get_forest_stats))
        .route("/frame.png", get(get_frame_png))
        .route("/stream", get(stream))
        .with_state(handle)
}
