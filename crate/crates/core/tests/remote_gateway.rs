//! Exercises the remote backend against a local stub server: retry
//! behavior, auth, the wire shape, and record-then-replay.

use axum::extract::State;
use axum::http::HeaderMap;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use waypoint_core::gateway::{
    BackendConfig, BackendKind, ChatBackend, ChatRequest, ChatTurn, FinishReason, GatewayError,
    RateLimiter, RecordingBackend, RemoteBackend, RetryPolicy, ScriptedBackend,
};

/// What the stub does with each request, after counting it.
enum Behavior {
    /// N failures with this status, then canned success.
    FailThen { failures: u32, status: u16 },
    /// Always this status with a plain body.
    Always(u16),
    /// HTTP 200 with a body that is not a completion reply.
    Garbage,
    /// Success whose content echoes the Authorization header.
    EchoAuth,
    /// Success; the request body is kept for inspection.
    Capture,
}

struct Stub {
    behavior: Behavior,
    hits: AtomicU32,
    bodies: Mutex<Vec<serde_json::Value>>,
}

fn canned(content: &str, finish: &str) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "choices": [{"message": {"content": content}, "finish_reason": finish}],
        "usage": {"prompt_tokens": 7, "completion_tokens": 3},
    }))
}

async fn handle(
    State(stub): State<Arc<Stub>>,
    headers: HeaderMap,
    Json(body): Json<serde_json::Value>,
) -> Response {
    let hit = stub.hits.fetch_add(1, Ordering::SeqCst) + 1;
    stub.bodies.lock().expect("bodies").push(body);
    match &stub.behavior {
        Behavior::FailThen { failures, status } if hit <= *failures => {
            (axum::http::StatusCode::from_u16(*status).expect("status"), "try again").into_response()
        }
        Behavior::FailThen { .. } => canned("finally", "stop").into_response(),
        Behavior::Always(status) => {
            (axum::http::StatusCode::from_u16(*status).expect("status"), "nope").into_response()
        }
        Behavior::Garbage => "<html>maintenance</html>".into_response(),
        Behavior::EchoAuth => {
            let auth = headers
                .get("authorization")
                .and_then(|v| v.to_str().ok())
                .unwrap_or("none")
                .to_string();
            canned(&auth, "stop").into_response()
        }
        Behavior::Capture => canned("captured", "length").into_response(),
    }
}

/// Boots a one-route stub and returns its completion URL.
async fn serve_stub(behavior: Behavior) -> (String, Arc<Stub>) {
    let stub = Arc::new(Stub { behavior, hits: AtomicU32::new(0), bodies: Mutex::new(Vec::new()) });
    let app = Router::new()
        .route("/v1/chat", post(handle))
        .with_state(stub.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
    let addr = listener.local_addr().expect("addr");
    tokio::spawn(async move {
        axum::serve(listener, app).await.expect("stub serve");
    });
    (format!("http://{addr}/v1/chat"), stub)
}

fn remote_config(endpoint: &str) -> BackendConfig {
    BackendConfig {
        kind: BackendKind::Remote,
        endpoint: Some(endpoint.to_string()),
        retry: RetryPolicy { max_attempts: 3, initial_backoff_ms: 1 },
        ..BackendConfig::default()
    }
}

fn request() -> ChatRequest {
    ChatRequest {
        system_prompt: "stay on script".into(),
        turns: vec![
            ChatTurn { speaker: "user".into(), text: "plan the trip".into() },
            ChatTurn { speaker: "assistant".into(), text: "working on it".into() },
            ChatTurn { speaker: "HotelExpert".into(), text: "two hotels found".into() },
        ],
        temperature: 0.25,
        max_tokens: 512,
        model_id: "test-model".into(),
    }
}

#[tokio::test]
async fn recovers_after_transient_server_errors() {
    let (url, stub) = serve_stub(Behavior::FailThen { failures: 2, status: 500 }).await;
    let backend = RemoteBackend::from_config(&remote_config(&url), None).expect("backend");
    let response = backend.complete("PlanCompiler", &request()).await.expect("completes");
    assert_eq!(response.text, "finally");
    assert_eq!(response.finish_reason, FinishReason::Complete);
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn gives_up_after_max_attempts() {
    let (url, stub) = serve_stub(Behavior::Always(503)).await;
    let backend = RemoteBackend::from_config(&remote_config(&url), None).expect("backend");
    let error = backend.complete("PlanCompiler", &request()).await.expect_err("exhausts");
    match error {
        GatewayError::RetriesExhausted { attempts, last } => {
            assert_eq!(attempts, 3);
            assert!(last.contains("503"), "{last}");
        }
        other => panic!("expected RetriesExhausted, got {other:?}"),
    }
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let (url, stub) = serve_stub(Behavior::Always(400)).await;
    let backend = RemoteBackend::from_config(&remote_config(&url), None).expect("backend");
    let error = backend.complete("PlanCompiler", &request()).await.expect_err("rejected");
    match error {
        GatewayError::Http { status, body } => {
            assert_eq!(status, 400);
            assert_eq!(body, "nope");
        }
        other => panic!("expected Http, got {other:?}"),
    }
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn malformed_success_bodies_are_not_retried() {
    let (url, stub) = serve_stub(Behavior::Garbage).await;
    let backend = RemoteBackend::from_config(&remote_config(&url), None).expect("backend");
    let error = backend.complete("PlanCompiler", &request()).await.expect_err("rejected");
    assert!(matches!(error, GatewayError::MalformedReply(_)), "{error:?}");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn bearer_token_is_read_from_the_environment() {
    let (url, _stub) = serve_stub(Behavior::EchoAuth).await;
    std::env::set_var("WAYPOINT_TEST_TOKEN", "sk-stub-123");
    let mut config = remote_config(&url);
    config.credentials_env = Some("WAYPOINT_TEST_TOKEN".into());
    let backend = RemoteBackend::from_config(&config, None).expect("backend");
    let response = backend.complete("PlanCompiler", &request()).await.expect("completes");
    assert_eq!(response.text, "Bearer sk-stub-123");
}

#[test]
fn missing_credentials_fail_at_construction() {
    let mut config = remote_config("http://127.0.0.1:9/v1/chat");
    config.credentials_env = Some("WAYPOINT_TEST_TOKEN_UNSET".into());
    std::env::remove_var("WAYPOINT_TEST_TOKEN_UNSET");
    let error = match RemoteBackend::from_config(&config, None) {
        Ok(_) => panic!("construction should fail without the token"),
        Err(e) => e,
    };
    assert!(matches!(error, GatewayError::MissingCredentials(var) if var == "WAYPOINT_TEST_TOKEN_UNSET"));
}

#[tokio::test]
async fn wire_shape_matches_the_chat_completion_protocol() {
    let (url, stub) = serve_stub(Behavior::Capture).await;
    let backend = RemoteBackend::from_config(&remote_config(&url), None).expect("backend");
    let response = backend.complete("PlanCompiler", &request()).await.expect("completes");

    // Truncated replies surface through the finish reason, and usage
    // numbers pass through untouched.
    assert_eq!(response.finish_reason, FinishReason::Length);
    assert_eq!(response.usage.prompt_tokens, 7);
    assert_eq!(response.usage.completion_tokens, 3);

    let bodies = stub.bodies.lock().expect("bodies");
    let body = &bodies[0];
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.25);
    assert_eq!(body["max_tokens"], 512);
    let messages = body["messages"].as_array().expect("messages");
    assert_eq!(messages.len(), 4);
    assert_eq!(messages[0]["role"], "system");
    assert_eq!(messages[0]["content"], "stay on script");
    assert_eq!(messages[1]["role"], "user");
    assert_eq!(messages[1]["content"], "plan the trip");
    assert_eq!(messages[2]["role"], "assistant");
    // Third-party speakers fold into labeled user content.
    assert_eq!(messages[3]["role"], "user");
    assert_eq!(messages[3]["content"], "HotelExpert: two hotels found");
}

#[tokio::test]
async fn recorded_live_traffic_replays_verbatim() {
    let (url, _stub) = serve_stub(Behavior::EchoAuth).await;
    let remote = RemoteBackend::from_config(&remote_config(&url), None).expect("backend");
    let recorder = RecordingBackend::new(remote);

    let first = request();
    let mut second = request();
    second.turns.push(ChatTurn { speaker: "user".into(), text: "and the budget?".into() });
    recorder.complete("PlanCompiler", &first).await.expect("first");
    recorder.complete("PlanCompiler", &second).await.expect("second");

    let cassette = recorder.cassette();
    assert_eq!(cassette.entries.len(), 2);
    assert!(cassette.entries.iter().all(|e| e.request_digest.is_some()));

    // Same callers, same requests: the replay returns the live texts.
    let replay = ScriptedBackend::new(cassette.clone());
    let a = replay.complete("PlanCompiler", &first).await.expect("replay first");
    let b = replay.complete("PlanCompiler", &second).await.expect("replay second");
    assert_eq!(a.text, "none");
    assert_eq!(b.text, "none");

    // A drifted request trips the digest guard instead of answering.
    let replay = ScriptedBackend::new(cassette);
    let mut drifted = request();
    drifted.system_prompt = "improvise".into();
    let error = replay.complete("PlanCompiler", &drifted).await.expect_err("diverged");
    assert!(matches!(error, GatewayError::DigestMismatch { index: 1, .. }), "{error:?}");
}

#[tokio::test]
async fn rate_limiter_allows_bursts_and_then_blocks() {
    let limiter = RateLimiter::new(3);
    let start = std::time::Instant::now();
    for _ in 0..3 {
        limiter.acquire().await;
    }
    assert!(start.elapsed() < Duration::from_secs(1), "burst should not wait");
    // The fourth token is ~20s out; it must not be available now.
    let blocked = tokio::time::timeout(Duration::from_millis(200), limiter.acquire()).await;
    assert!(blocked.is_err(), "fourth acquire should block");
}
