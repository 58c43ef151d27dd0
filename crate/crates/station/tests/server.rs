use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use futures_util::{SinkExt, StreamExt};
use roverlink::geometry::{Point2, Pose2D};
use roverlink::ground_station::{GoalPose, Session, SessionConfig};
use roverlink::telemetry::decode_frame;
use roverlink::world::{Bounds, WorldScene};
use roverlink_station::server::{router, run_clock, Station};
use serde_json::Value;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

fn station() -> Arc<Station> {
    let scene = WorldScene::new("pad", Bounds::new(Point2::new(0.0, 0.0), Point2::new(6.0, 6.0)))
        .with_start(Pose2D::new(2.0, 3.0, 0.0));
    let mut cfg = SessionConfig::default();
    cfg.onboard.camera = None;
    Station::new(Session::new(scene, cfg).unwrap())
}

async fn call(app: axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let body = to_bytes(resp.into_body(), 1 << 20).await.unwrap();
    (status, serde_json::from_slice(&body).unwrap())
}

fn post_json(uri: &str, body: String) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap()
}

#[tokio::test]
async fn health_reports_session_state() {
    let st = station();
    st.step().unwrap();
    let (code, v) = call(router(st, None), Request::get("/health").body(Body::empty()).unwrap()).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["scene"], "pad");
    assert_eq!(v["mode"], "teleop");
    assert_eq!(v["controller_connected"], false);
    assert_eq!(v["pose"]["x"], 2.0);
}

#[tokio::test]
async fn echo_goal_round_trips_random_drags() {
    let app = router(station(), None);
    // xorshift keeps the drags reproducible without another dependency
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
    };
    for i in 0..1000 {
        let press = Point2::new(next(), next());
        let release = Point2::new(next(), next());
        let local = GoalPose::from_drag(format!("d{i}"), press, release).unwrap();
        let body = serde_json::json!({"id": local.id, "press": press, "release": release}).to_string();
        let (code, v) = call(app.clone(), post_json("/api/echo-goal", body)).await;
        assert_eq!(code, StatusCode::OK);
        let echoed: GoalPose = serde_json::from_value(v).unwrap();
        assert_eq!(echoed.x.to_bits(), local.x.to_bits());
        assert_eq!(echoed.y.to_bits(), local.y.to_bits());
        assert_eq!(echoed.theta.to_bits(), local.theta.to_bits());

        let (_, v) = call(app.clone(), post_json("/api/echo-goal", serde_json::to_string(&local).unwrap())).await;
        assert_eq!(serde_json::from_value::<GoalPose>(v).unwrap(), local);
    }
    let bad = serde_json::json!({"id": "z", "press": {"x": 1.0, "y": 1.0}, "release": {"x": 1.0, "y": 1.0}});
    let (code, _) = call(app, post_json("/api/echo-goal", bad.to_string())).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
}

async fn next_text(ws: &mut (impl StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin)) -> Value {
    loop {
        match tokio::time::timeout(Duration::from_secs(5), ws.next()).await.unwrap().unwrap().unwrap() {
            Message::Text(t) => {
                let v: Value = serde_json::from_str(&t).unwrap();
                if v["type"] != "budget" {
                    return v;
                }
            }
            _ => continue,
        }
    }
}

#[tokio::test]
async fn websocket_controller_and_observer() {
    let st = station();
    let clock = tokio::spawn(run_clock(st.clone(), 10.0));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(st.clone(), None);
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    let url = format!("ws://{addr}/ws");

    let (mut ctl, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    assert_eq!(next_text(&mut ctl).await["role"], "controller");
    let (mut obs, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    assert_eq!(next_text(&mut obs).await["role"], "observer");

    obs.send(Message::text(r#"{"type":"emergency_stop"}"#)).await.unwrap();
    let v = next_text(&mut obs).await;
    assert_eq!(v["type"], "error");

    ctl.send(Message::text(r#"{"type":"joystick_twist","lever_fwd":1.0,"lever_rot":0.0}"#))
        .await
        .unwrap();
    let v = next_text(&mut ctl).await;
    assert_eq!(v["type"], "accepted");
    assert_eq!(v["mode"], "teleop");
    ctl.send(Message::text(r#"{"type":"fly"}"#)).await.unwrap();
    assert_eq!(next_text(&mut ctl).await["type"], "error");

    // binary messages are length-prefixed telemetry frames
    let mut frames = 0;
    while frames < 20 {
        let m = tokio::time::timeout(Duration::from_secs(5), obs.next()).await.unwrap().unwrap().unwrap();
        if let Message::Binary(b) = m {
            let len = u32::from_le_bytes(b[..4].try_into().unwrap()) as usize;
            assert_eq!(len, b.len() - 4);
            let (_, used) = decode_frame(&b[4..]).unwrap();
            assert_eq!(used, len);
            frames += 1;
        }
    }

    // the controller leaving frees the seat for the next connection
    ctl.close(None).await.unwrap();
    drop(ctl);
    let mut seat_free = false;
    for _ in 0..50 {
        tokio::time::sleep(Duration::from_millis(20)).await;
        if st.health()["controller_connected"] == false {
            seat_free = true;
            break;
        }
    }
    assert!(seat_free);
    let (mut next, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    assert_eq!(next_text(&mut next).await["role"], "controller");
    clock.abort();
}

#[tokio::test]
async fn static_assets_are_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<!doctype html><title>console</title>").unwrap();
    let app = router(station(), Some(dir.path().to_path_buf()));
    let resp = app
        .oneshot(Request::get("/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = to_bytes(resp.into_body(), 1 << 16).await.unwrap();
    assert!(body.starts_with(b"<!doctype html>"));
}
