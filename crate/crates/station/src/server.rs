//! Live ground-station service: runs a session in real time and bridges it
//! to browser consoles over websockets.
//!
//! Downlink frames go out as binary messages `[len u32 LE][frame bytes]`.
//! Commands come in as JSON text, e.g. `{"type":"joystick_twist","lever_fwd":1,"lever_rot":0}`.
//! The first connection controls the rover; later ones only observe.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use roverlink::geometry::Point2;
use roverlink::ground_station::{GoalPose, OperatorCommand, Session};
use roverlink::telemetry::encode_frame;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, mpsc};
use tower_http::services::ServeDir;

/// Wraps an encoded frame in the websocket envelope.
pub fn envelope(frame: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.len() + 4);
    out.extend((frame.len() as u32).to_le_bytes());
    out.extend_from_slice(frame);
    out
}

#[derive(Debug, Clone)]
pub enum Outbound {
    Frame(Arc<Vec<u8>>),
    Text(Arc<String>),
}

pub struct Station {
    pub session: Mutex<Session>,
    tx: broadcast::Sender<Outbound>,
    controller: Mutex<Option<u64>>,
    next_client: AtomicU64,
    clients: AtomicUsize,
    notices_sent: AtomicUsize,
}

impl Station {
    pub fn new(session: Session) -> Arc<Self> {
        let (tx, _) = broadcast::channel(1024);
        Arc::new(Self {
            session: Mutex::new(session),
            tx,
            controller: Mutex::new(None),
            next_client: AtomicU64::new(1),
            clients: AtomicUsize::new(0),
            notices_sent: AtomicUsize::new(0),
        })
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Outbound> {
        self.tx.subscribe()
    }

    /// Advances the session one step and fans the delivered frames out.
    pub fn step(&self) -> anyhow::Result<()> {
        let mut s = self.session.lock().unwrap();
        let delivered = s.step()?;
        let once_per_second = (1.0 / s.config().onboard.dt).round() as u64;
        let tick = (s.time() / s.config().onboard.dt).round() as u64;
        let budget = tick.is_multiple_of(once_per_second).then(|| s.budget());
        let seen = self.notices_sent.swap(s.ground().notices.len(), Ordering::Relaxed);
        let notices: Vec<String> = s.ground().notices[seen..].to_vec();
        drop(s);
        for d in delivered {
            let bytes = encode_frame(&d.frame)?;
            // no receivers is fine
            let _ = self.tx.send(Outbound::Frame(Arc::new(envelope(&bytes))));
        }
        if let Some(b) = budget {
            let msg = json!({"type": "budget", "report": b}).to_string();
            let _ = self.tx.send(Outbound::Text(Arc::new(msg)));
        }
        for n in notices {
            let _ = self.tx.send(Outbound::Text(Arc::new(json!({"type": "notice", "message": n}).to_string())));
        }
        Ok(())
    }

    pub fn health(&self) -> serde_json::Value {
        let s = self.session.lock().unwrap();
        let o = s.onboard();
        let pose = o.pose();
        json!({
            "status": "ok",
            "scene": s.scene().name,
            "time": s.time(),
            "latency": s.config().link.one_way_delay,
            "mode": o.mode(),
            "goal": o.goal().map(|(id, st)| json!({"id": id, "state": st})),
            "deadman_tripped": o.deadman_tripped(),
            "pose": {"x": pose.x, "y": pose.y, "theta": pose.theta},
            "clients": self.clients.load(Ordering::Relaxed),
            "controller_connected": self.controller.lock().unwrap().is_some(),
        })
    }
}

/// Steps the session at wall-clock rate scaled by `speed` until the task is dropped.
pub async fn run_clock(station: Arc<Station>, speed: f64) {
    let dt = station.session.lock().unwrap().config().onboard.dt;
    let mut timer = tokio::time::interval(Duration::from_secs_f64(dt / speed));
    timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        timer.tick().await;
        let st = station.clone();
        match tokio::task::spawn_blocking(move || st.step()).await {
            Ok(Ok(())) => {}
            Ok(Err(e)) => {
                tracing::error!("simulation stopped: {e}");
                return;
            }
            Err(e) => {
                tracing::error!("simulation task failed: {e}");
                return;
            }
        }
    }
}

pub fn router(station: Arc<Station>, static_dir: Option<PathBuf>) -> Router {
    let app = Router::new()
        .route("/health", get(health))
        .route("/ws", get(ws_upgrade))
        .route("/api/echo-goal", post(echo_goal))
        .route("/api/budget", get(budget))
        .with_state(station);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn health(State(st): State<Arc<Station>>) -> impl IntoResponse {
    Json(st.health())
}

async fn budget(State(st): State<Arc<Station>>) -> impl IntoResponse {
    Json(st.session.lock().unwrap().budget())
}

/// Either a goal as the console computed it or the raw drag.
#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum EchoRequest {
    Drag { id: String, press: Point2, release: Point2 },
    Goal(GoalPose),
}

/// Returns the goal exactly as the server would execute it.
async fn echo_goal(Json(req): Json<EchoRequest>) -> impl IntoResponse {
    let goal = match req {
        EchoRequest::Goal(g) => g.normalized(),
        EchoRequest::Drag { id, press, release } => GoalPose::from_drag(id, press, release),
    };
    match goal {
        Ok(g) => (StatusCode::OK, Json(json!(g))),
        Err(e) => (StatusCode::BAD_REQUEST, Json(json!({"error": e.to_string()}))),
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(st): State<Arc<Station>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, st))
}

async fn client(socket: WebSocket, st: Arc<Station>) {
    let id = st.next_client.fetch_add(1, Ordering::Relaxed);
    st.clients.fetch_add(1, Ordering::Relaxed);
    let controller = {
        let mut c = st.controller.lock().unwrap();
        if c.is_none() {
            *c = Some(id);
        }
        *c == Some(id)
    };
    let (mut sink, mut stream) = socket.split();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    let mut feed = st.subscribe();
    let hello = {
        let s = st.session.lock().unwrap();
        json!({
            "type": "hello",
            "role": if controller { "controller" } else { "observer" },
            "scene": s.scene().name,
            "latency": s.config().link.one_way_delay,
            "footprint": s.config().onboard.params.footprint,
        })
    };
    let _ = reply_tx.send(hello.to_string());

    let writer = tokio::spawn(async move {
        loop {
            let msg = tokio::select! {
                r = reply_rx.recv() => match r {
                    Some(t) => Message::Text(t.into()),
                    None => break,
                },
                f = feed.recv() => match f {
                    Ok(Outbound::Frame(b)) => Message::Binary(b.as_ref().clone().into()),
                    Ok(Outbound::Text(t)) => Message::Text(t.as_ref().clone().into()),
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::warn!("client {id} lagged, skipped {n} messages");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(msg).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = if !controller {
            json!({"type": "error", "message": "observer connections are read-only"})
        } else {
            match OperatorCommand::from_json(&text) {
                Ok(cmd) => {
                    let mut s = st.session.lock().unwrap();
                    match s.submit(cmd) {
                        Ok(mode) => json!({"type": "accepted", "time": s.time(), "mode": mode}),
                        Err(e) => json!({"type": "error", "message": e.to_string()}),
                    }
                }
                Err(e) => json!({"type": "error", "message": e.to_string()}),
            }
        };
        if reply_tx.send(reply.to_string()).is_err() {
            break;
        }
    }
    drop(reply_tx);
    writer.abort();
    st.clients.fetch_sub(1, Ordering::Relaxed);
    let mut c = st.controller.lock().unwrap();
    if *c == Some(id) {
        *c = None;
    }
}
