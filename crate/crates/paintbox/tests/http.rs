use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use paintbox::server::{router, spawn_engine, StreamFrame};
use paintbox_core::engine::{EngineSettings, Session};
use paintbox_core::presets::{orbit_poses, room, RoomSpec};
use paintbox_core::rendering::decode_png;

const FLOOR_COLOR: [u8; 3] = [230, 200, 60];

/// A room session and a pixel whose 5x5 neighbourhood is all floor.
fn app() -> (Router, (usize, usize)) {
    let spec = RoomSpec::default();
    let g = room(spec);
    let mut s = Session::with_pose(g.scene.clone(), EngineSettings::default(), orbit_poses(&spec, 4, 1.6)[0]).unwrap();
    s.frame().unwrap();
    let rc = s.last_raycast().unwrap();
    let floor = g.classes[0];
    let is_floor = |x: usize, y: usize| rc.position(s.scene(), x, y).map(|p| g.truth[&p]) == Some(floor);
    let pixel = (2..rc.height() - 2)
        .rev()
        .flat_map(|y| (2..rc.width() - 2).map(move |x| (x, y)))
        .find(|&(x, y)| (0..5).all(|dy| (0..5).all(|dx| is_floor(x + dx - 2, y + dy - 2))))
        .expect("floor visible");
    let (handle, _join) = spawn_engine(s, 200.0);
    (router(handle), pixel)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn state_reports_the_session() {
    let (app, _) = app();
    let (st, v) = call(&app, "GET", "/state", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["mode"], "NORMAL");
    assert_eq!(v["voxels"], 23816);
    assert_eq!(v["width"], 320);
}

#[tokio::test]
async fn commands_ack_or_reject() {
    let (app, _) = app();
    let (st, v) = call(&app, "POST", "/command", Some(json!({ "text": "label table" }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["warning"], false);
    let (_, state) = call(&app, "GET", "/state", None).await;
    assert_eq!(state["current_label_name"], "table");

    let (st, v) = call(&app, "POST", "/command", Some(json!({ "text": "jump" }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("jump"));

    let (st, v) = call(&app, "POST", "/command", Some(json!({ "text": "undo" }))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["warning"], true, "empty history is a no-op warning");
}

#[tokio::test]
async fn mode_endpoint_accepts_table_1_names() {
    let (app, _) = app();
    let (st, _) = call(&app, "POST", "/mode", Some(json!({ "mode": "TRAINING" }))).await;
    assert_eq!(st, StatusCode::OK);
    let (_, v) = call(&app, "GET", "/state", None).await;
    assert_eq!(v["mode"], "TRAINING");
    let (st, _) = call(&app, "POST", "/mode", Some(json!({ "mode": "FLYING" }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn labels_list_and_add() {
    let (app, _) = app();
    let (_, v) = call(&app, "GET", "/labels", None).await;
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"floor") && names.contains(&"box"));
    let (st, _) = call(&app, "POST", "/labels", Some(json!({ "name": "chair", "color": [10, 20, 30] }))).await;
    assert_eq!(st, StatusCode::OK);
    let (_, v) = call(&app, "GET", "/labels", None).await;
    assert!(v.as_array().unwrap().iter().any(|e| e["name"] == "chair" && e["color"] == json!([10, 20, 30])));
}

#[tokio::test]
async fn forest_stats_has_one_entry_per_tree() {
    let (app, _) = app();
    let (st, v) = call(&app, "GET", "/forest/stats", None).await;
    assert_eq!(st, StatusCode::OK);
    let trees = EngineSettings::default().forest.tree_count;
    assert_eq!(v["trees"].as_array().unwrap().len(), trees);
}

#[tokio::test]
async fn camera_motion_moves_the_pose() {
    let (app, _) = app();
    let (_, before) = call(&app, "GET", "/state", None).await;
    let motion = json!({ "motion": { "kind": "translate", "axis": "n", "distance": 0.1 } });
    let (st, _) = call(&app, "POST", "/camera", Some(motion)).await;
    assert_eq!(st, StatusCode::OK);
    let (_, after) = call(&app, "GET", "/state", None).await;
    assert_ne!(before["camera"], after["camera"]);
}

#[tokio::test]
async fn pick_outside_the_view_is_rejected() {
    let (app, _) = app();
    let (st, v) = call(&app, "POST", "/pick", Some(json!({ "x": 5000, "y": 1, "label": "floor" }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("outside"));
}

fn distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter().zip(b).map(|(&x, y)| (x as f64 - y as f64).powi(2)).sum::<f64>().sqrt()
}

/// Pick a floor pixel with the floor label, then read the next streamed
/// frame: the neighbourhood now carries the floor overlay colour.
#[tokio::test]
async fn pick_shows_up_in_the_stream() {
    let (app, (x, y)) = app();
    let res = app.clone().oneshot(Request::get("/stream").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.headers()["content-type"], "text/event-stream");
    let mut body = res.into_body();

    let before = decode_png(&{
        let res = app.clone().oneshot(Request::get("/frame.png").body(Body::empty()).unwrap()).await.unwrap();
        res.into_body().collect().await.unwrap().to_bytes()
    })
    .unwrap();
    let (st, v) = call(&app, "POST", "/pick", Some(json!({ "x": x, "y": y, "radius": 1, "label": "floor" }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");

    // read events until one from a frame after the pick arrives
    let mut buf = String::new();
    let frame = tokio::time::timeout(Duration::from_secs(20), async {
        loop {
            let chunk = body.frame().await.unwrap().unwrap().into_data().unwrap();
            buf.push_str(std::str::from_utf8(&chunk).unwrap());
            while let Some(end) = buf.find("\n\n") {
                let event: String = buf.drain(..end + 2).collect();
                let Some(data) = event.lines().find_map(|l| l.strip_prefix("data: ")) else { continue };
                let f: StreamFrame = serde_json::from_str(data).unwrap();
                if f.report.counts.inputs == 0 {
                    return f;
                }
            }
        }
    })
    .await
    .expect("a frame within 20 s");

    use base64::Engine as _;
    let png = base64::engine::general_purpose::STANDARD.decode(&frame.png).unwrap();
    let after = decode_png(&png).unwrap();
    for dy in 0..3 {
        for dx in 0..3 {
            let i = (y + dy - 1) * after.width + (x + dx - 1);
            assert!(
                distance(after.pixels[i], FLOOR_COLOR) < distance(before.pixels[i], FLOOR_COLOR),
                "pixel {i}: {:?} -> {:?}",
                before.pixels[i],
                after.pixels[i]
            );
        }
    }
}
