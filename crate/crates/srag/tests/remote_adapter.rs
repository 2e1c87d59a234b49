//! Remote adapter wire-protocol tests against a minimal in-process HTTP
//! server. No live inference backend is required anywhere in the suite.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use srag::corpus::{Document, QualityLabel};
use srag::{DecisionVariant, Error, ModelAdapter, RemoteAdapter};

/// Read one HTTP request, return its body.
fn read_request(stream: &mut TcpStream) -> String {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end;
    loop {
        let n = stream.read(&mut chunk).expect("read request");
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            header_end = pos + 4;
            break;
        }
        assert!(n > 0, "connection closed before headers");
    }
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length: usize = headers
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    while buf.len() < header_end + content_length {
        let n = stream.read(&mut chunk).expect("read body");
        assert!(n > 0, "connection closed before body");
        buf.extend_from_slice(&chunk[..n]);
    }
    String::from_utf8_lossy(&buf[header_end..header_end + content_length]).to_string()
}

fn write_response(stream: &mut TcpStream, status: &str, body: &str) {
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream
        .write_all(response.as_bytes())
        .expect("write response");
}

/// Spawn a server answering `n_requests` requests with `handler(body)`.
fn spawn_server(
    n_requests: usize,
    handler: impl Fn(&str) -> (String, String) + Send + Sync + 'static,
) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let endpoint = format!("http://{}/generate", listener.local_addr().unwrap());
    let handler = Arc::new(handler);
    thread::spawn(move || {
        for _ in 0..n_requests {
            let (mut stream, _) = listener.accept().expect("accept");
            let handler = Arc::clone(&handler);
            thread::spawn(move || {
                let body = read_request(&mut stream);
                let (status, response) = handler(&body);
                write_response(&mut stream, &status, &response);
            });
        }
    });
    endpoint
}

fn adapter(endpoint: String) -> RemoteAdapter {
    RemoteAdapter::new(endpoint, "test-model".into(), Duration::from_secs(2), 4)
}

#[test]
fn confidence_from_token_logprobs() {
    let endpoint = spawn_server(1, |body| {
        let request: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(request["model"], "test-model");
        assert!(request["prompt"]
            .as_str()
            .unwrap()
            .contains("what is water"));
        (
            "200 OK".into(),
            r#"{"text":"H2O","token_logprobs":[-0.1,-0.2,-0.15]}"#.into(),
        )
    });
    let c = adapter(endpoint).model_confidence("what is water").unwrap();
    // mean logprob -0.15 is well above the logistic center, so high confidence
    assert!(c.value() > 0.8, "{}", c.value());
    assert!((0.0..=1.0).contains(&c.value()));
}

#[test]
fn confidence_from_self_rating_text() {
    let endpoint = spawn_server(1, |_| ("200 OK".into(), r#"{"text":" 0.75 "}"#.into()));
    let c = adapter(endpoint).model_confidence("q").unwrap();
    assert_eq!(c.value(), 0.75);
}

#[test]
fn non_numeric_self_rating_is_adapter_error() {
    let endpoint = spawn_server(1, |_| ("200 OK".into(), r#"{"text":"maybe?"}"#.into()));
    match adapter(endpoint).model_confidence("q") {
        Err(Error::Adapter(msg)) => assert!(msg.contains("self-rating"), "{msg}"),
        other => panic!("expected adapter error, got {other:?}"),
    }
}

#[test]
fn generation_sends_mode_prompt_and_context() {
    let endpoint = spawn_server(1, |body| {
        let request: serde_json::Value = serde_json::from_str(body).unwrap();
        let prompt = request["prompt"].as_str().unwrap();
        assert!(prompt.contains("[d7]"), "{prompt}");
        assert!(prompt.contains("melt rate text"), "{prompt}");
        assert!(prompt.contains("only the documents"), "{prompt}");
        ("200 OK".into(), r#"{"text":"answer from [d7]"}"#.into())
    });
    let d7 = Document {
        doc_id: "d7".into(),
        text: "melt rate text".into(),
        source_id: "s".into(),
        provenance_label: None,
        quality_label: QualityLabel::Unknown,
    };
    let text = adapter(endpoint)
        .generate_response("q", &[&d7], DecisionVariant::RetrievedOnly)
        .unwrap();
    assert_eq!(text, "answer from [d7]");
}

#[test]
fn backend_error_status_is_adapter_error() {
    let endpoint = spawn_server(1, |_| {
        (
            "500 Internal Server Error".into(),
            r#"{"oops":true}"#.into(),
        )
    });
    match adapter(endpoint).model_confidence("q") {
        // ureq may surface the status itself as an error, or hand back the
        // response for our status check; both must land in Error::Adapter
        Err(Error::Adapter(_)) => {}
        other => panic!("expected adapter error, got {other:?}"),
    }
}

#[test]
fn malformed_body_is_adapter_error() {
    let endpoint = spawn_server(1, |_| ("200 OK".into(), "not json at all".into()));
    assert!(matches!(
        adapter(endpoint).model_confidence("q"),
        Err(Error::Adapter(_))
    ));
}

#[test]
fn timeout_is_adapter_error() {
    // accept the connection, read the request, never respond
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let endpoint = format!("http://{}/generate", listener.local_addr().unwrap());
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().expect("accept");
        let _ = read_request(&mut stream);
        thread::sleep(Duration::from_secs(5));
    });
    let adapter = RemoteAdapter::new(endpoint, "m".into(), Duration::from_millis(200), 1);
    assert!(matches!(
        adapter.model_confidence("q"),
        Err(Error::Adapter(_))
    ));
}

#[test]
fn in_flight_requests_are_bounded() {
    let live = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (live_s, peak_s) = (Arc::clone(&live), Arc::clone(&peak));
    let endpoint = spawn_server(6, move |_| {
        let now = live_s.fetch_add(1, Ordering::SeqCst) + 1;
        peak_s.fetch_max(now, Ordering::SeqCst);
        thread::sleep(Duration::from_millis(50));
        live_s.fetch_sub(1, Ordering::SeqCst);
        ("200 OK".into(), r#"{"text":"0.5"}"#.into())
    });
    let adapter = Arc::new(RemoteAdapter::new(
        endpoint,
        "m".into(),
        Duration::from_secs(5),
        2,
    ));
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let adapter = Arc::clone(&adapter);
            thread::spawn(move || adapter.model_confidence("q").unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert!(
        peak.load(Ordering::SeqCst) <= 2,
        "peak concurrency {} exceeded the in-flight bound",
        peak.load(Ordering::SeqCst)
    );
}
