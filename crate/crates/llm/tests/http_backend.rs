use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use rtlsmith_llm::{chat, BackendConfig, ChatMessage, HttpBackend, LlmError};

/// Serves one canned (status, body) per connection and counts requests.
struct FakeServer {
    url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<std::sync::Mutex<Vec<String>>>,
}

fn serve(responses: Vec<(u16, String)>) -> FakeServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(std::sync::Mutex::new(Vec::new()));
    let (h, b) = (hits.clone(), bodies.clone());
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut req = vec![0u8; len];
            reader.read_exact(&mut req).unwrap();
            b.lock().unwrap().push(String::from_utf8_lossy(&req).into_owned());
            h.fetch_add(1, Ordering::SeqCst);
            let mut stream = reader.into_inner();
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    FakeServer { url, hits, bodies }
}

fn ok_body(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn backend(url: &str) -> HttpBackend {
    HttpBackend::new(BackendConfig {
        endpoint: url.into(),
        model: "test-model".into(),
        max_retries: 3,
        backoff_ms: 1,
        timeout_secs: 5.0,
        ..BackendConfig::default()
    })
    .unwrap()
}

fn msgs() -> Vec<ChatMessage> {
    vec![ChatMessage::system("be brief"), ChatMessage::user("ping")]
}

#[test]
fn retries_transient_failures_then_succeeds() {
    let s = serve(vec![(503, "{}".into()), (503, "{}".into()), (200, ok_body("pong"))]);
    let reply = chat(&backend(&s.url), "t", &msgs()).unwrap();
    assert_eq!(reply.message.content, "pong");
    assert_eq!(reply.attempts, 3);
    assert_eq!(s.hits.load(Ordering::SeqCst), 3);

    let sent: serde_json::Value = serde_json::from_str(&s.bodies.lock().unwrap()[2]).unwrap();
    assert_eq!(sent["model"], "test-model");
    assert_eq!(sent["temperature"], 0.1);
    assert_eq!(sent["top_p"], 1.0);
    assert_eq!(sent["messages"][1]["content"], "ping");
}

#[test]
fn rejection_carries_the_body() {
    let s = serve(vec![(400, r#"{"error":"bad model"}"#.into())]);
    match chat(&backend(&s.url), "t", &msgs()) {
        Err(LlmError::BackendRejected { status, body }) => {
            assert_eq!(status, 400);
            assert!(body.contains("bad model"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(s.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn gives_up_after_max_retries() {
    let s = serve(vec![(500, "{}".into()); 4]);
    match chat(&backend(&s.url), "t", &msgs()) {
        Err(LlmError::BackendUnavailable { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("{other:?}"),
    }
    assert_eq!(s.hits.load(Ordering::SeqCst), 4);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    drop(listener);
    let err = chat(&backend(&url), "t", &msgs()).unwrap_err();
    assert!(matches!(err, LlmError::BackendUnavailable { attempts: 4, .. }), "{err}");
}

#[test]
fn exchanges_are_kept_when_asked() {
    let s = serve(vec![(200, ok_body("x"))]);
    let reply = chat(&backend(&s.url).with_exchanges(true), "t", &msgs()).unwrap();
    let ex = reply.exchange.unwrap();
    assert_eq!(ex.request["messages"][0]["role"], "system");
    assert_eq!(ex.response["choices"][0]["message"]["content"], "x");
}

#[test]
fn preconditions_are_checked_before_sending() {
    let s = serve(vec![]);
    let err = chat(&backend(&s.url), "t", &[ChatMessage::user("no system")]).unwrap_err();
    assert!(matches!(err, LlmError::InvalidRequest(_)));
    assert_eq!(s.hits.load(Ordering::SeqCst), 0);
}
