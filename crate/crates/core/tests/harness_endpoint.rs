use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use ragdepth::harness::{ChatClient, Completer, EndpointConfig, EndpointError, Message};

struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

fn reply(status: u16, body: &str) -> Reply {
    Reply {
        status,
        body: body.to_string(),
        delay: Duration::ZERO,
    }
}

fn chat_body(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

/// Serves one scripted reply per connection and forwards each request
/// (headers and body) to the returned channel.
fn serve(script: Vec<Reply>) -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for r in script {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut length = 0usize;
            let mut chunked = false;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
                if line.to_ascii_lowercase().starts_with("transfer-encoding: chunked") {
                    chunked = true;
                }
                head.push_str(&line);
            }
            let body = if chunked { read_chunked(&mut reader) } else { read_exact(&mut reader, length) };
            let _ = tx.send(format!("{head}\n{}", String::from_utf8_lossy(&body)));
            thread::sleep(r.delay);
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                r.status,
                r.body.len(),
                r.body
            );
        }
    });
    (url, rx)
}

fn read_exact(reader: &mut impl Read, n: usize) -> Vec<u8> {
    let mut buf = vec![0u8; n];
    let _ = reader.read_exact(&mut buf);
    buf
}

fn read_chunked(reader: &mut impl BufRead) -> Vec<u8> {
    let mut body = Vec::new();
    loop {
        let mut size = String::new();
        if reader.read_line(&mut size).unwrap_or(0) == 0 {
            return body;
        }
        let n = usize::from_str_radix(size.trim(), 16).unwrap_or(0);
        body.extend(read_exact(reader, n));
        read_exact(reader, 2);
        if n == 0 {
            return body;
        }
    }
}

fn config(url: &str) -> EndpointConfig {
    EndpointConfig {
        base_url: url.to_string(),
        model: "test-model".into(),
        backoff_ms: 10,
        timeout_secs: 2.0,
        ..EndpointConfig::default()
    }
}

fn ask() -> Vec<Message> {
    vec![
        Message {
            role: "system".into(),
            content: "answer briefly".into(),
        },
        Message {
            role: "user".into(),
            content: "Question: capital of France?".into(),
        },
    ]
}

#[test]
fn echoes_completion_and_sends_credentials() {
    let (url, rx) = serve(vec![reply(200, &chat_body("Paris"))]);
    let client = ChatClient::new(config(&url), "sk-test".into());
    let c = client.complete(&ask()).unwrap();
    assert_eq!(c.text, "Paris");
    assert_eq!(c.retries, 0);
    let request = rx.recv().unwrap();
    assert!(request.starts_with("POST /v1/chat/completions"));
    assert!(request.to_ascii_lowercase().contains("authorization: bearer sk-test"));
    let (_, body) = request.split_once("\n\n").unwrap();
    let body: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][1]["content"], "Question: capital of France?");
}

#[test]
fn retries_rate_limits_then_succeeds() {
    let (url, rx) = serve(vec![
        reply(429, "{\"error\":\"slow down\"}"),
        reply(429, "{\"error\":\"slow down\"}"),
        reply(200, &chat_body("Paris")),
    ]);
    let client = ChatClient::new(config(&url), "k".into());
    let c = client.complete(&ask()).unwrap();
    assert_eq!(c.text, "Paris");
    assert_eq!(c.retries, 2);
    assert_eq!(rx.try_iter().count(), 3);
}

#[test]
fn gives_up_after_attempt_cap() {
    let (url, rx) = serve(vec![reply(503, "busy"), reply(503, "busy"), reply(503, "busy"), reply(200, "{}")]);
    let client = ChatClient::new(config(&url), "k".into());
    match client.complete(&ask()) {
        Err(EndpointError::Http { status: 503, attempts: 3, .. }) => {}
        other => panic!("expected HTTP 503 after 3 attempts, got {other:?}"),
    }
    assert_eq!(rx.try_iter().count(), 3);
}

#[test]
fn missing_key_fails_before_network() {
    let err = ChatClient::with_key(config("http://127.0.0.1:9"), None).unwrap_err();
    assert!(matches!(err, EndpointError::Auth(_)));
    let err = ChatClient::with_key(config("http://127.0.0.1:9"), Some("  ".into())).unwrap_err();
    assert!(matches!(err, EndpointError::Auth(_)));
}

#[test]
fn rejected_key_is_auth_error_without_retry() {
    let (url, rx) = serve(vec![reply(401, "{\"error\":\"bad key\"}"), reply(200, &chat_body("x"))]);
    let client = ChatClient::new(config(&url), "k".into());
    assert!(matches!(client.complete(&ask()), Err(EndpointError::Auth(_))));
    assert_eq!(rx.try_iter().count(), 1);
}

#[test]
fn slow_server_times_out() {
    let slow = || Reply {
        status: 200,
        body: chat_body("late"),
        delay: Duration::from_millis(1500),
    };
    let (url, _rx) = serve(vec![slow(), slow()]);
    let cfg = EndpointConfig {
        timeout_secs: 0.3,
        max_attempts: 2,
        ..config(&url)
    };
    let client = ChatClient::new(cfg, "k".into());
    match client.complete(&ask()) {
        Err(EndpointError::Timeout { attempts: 2 }) => {}
        other => panic!("expected timeout after 2 attempts, got {other:?}"),
    }
}

#[test]
fn malformed_body_is_distinct() {
    let (url, _rx) = serve(vec![reply(200, "not json"), reply(200, "{\"choices\": []}")]);
    let client = ChatClient::new(config(&url), "k".into());
    assert!(matches!(client.complete(&ask()), Err(EndpointError::Malformed(_))));
    assert!(matches!(client.complete(&ask()), Err(EndpointError::Malformed(_))));
}
