//! Start the service on an ephemeral port and drive one session over HTTP.

use std::net::SocketAddr;

use parliament::service::{router, AppState, ServiceConfig};
use parliament::{EngineOptions, SessionRuntime};
use serde_json::{json, Value};

#[tokio::main]
async fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let sessions = tempfile::tempdir().unwrap();
    let state = AppState::new(
        ServiceConfig {
            personas_dir: root.join("personas"),
            sessions_dir: sessions.path().to_path_buf(),
            options: EngineOptions::default(),
        },
        SessionRuntime::default(),
    );
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });

    tokio::task::spawn_blocking(move || {
        let get = |path: &str| -> Value {
            ureq::get(format!("{base}{path}"))
                .call()
                .unwrap()
                .body_mut()
                .read_json()
                .unwrap()
        };
        let post = |path: &str, body: Value| -> Value {
            ureq::post(format!("{base}{path}"))
                .send_json(body)
                .unwrap()
                .body_mut()
                .read_json()
                .unwrap()
        };

        for p in get("/personas").as_array().unwrap() {
            println!("persona {}", p["persona_id"]);
        }
        let id = post("/sessions", json!({ "persona_id": "math_anxious_student" }))["session_id"]
            .as_str()
            .unwrap()
            .to_string();
        let turn = post(
            &format!("/sessions/{id}/turns"),
            json!({ "text": "Solve for x: 2x + 5 = 13" }),
        );
        println!(
            "POST turn -> {} {}",
            turn["outcome"]["category"], turn["outcome"]["utterance"]
        );
        let peek = get(&format!("/sessions/{id}/turns/1/peek"));
        for a in peek["rounds"][0]["agents"].as_array().unwrap() {
            println!(
                "  {:<20} activation {}",
                a["construct"].as_str().unwrap(),
                a["activation"]
            );
        }
    })
    .await
    .unwrap();
}
