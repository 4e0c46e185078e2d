//! Chat-completions client and a local mock endpoint for tests and
//! offline LLM-backend runs.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};
use proleg_core::generator::{
    response_content, BackendError, ChatCompletion, LlmBackendConfig, Message,
};
use ureq::Agent;

use crate::formats::{read_text, FormatError};

/// Blocking client for `POST {base_url}/v1/chat/completions`.
#[derive(Debug, Clone)]
pub struct HttpChat {
    cfg: LlmBackendConfig,
    api_key: String,
    agent: Agent,
}

impl HttpChat {
    /// Reads the API key from the configured variable; fails before any
    /// request when it is unset or empty.
    pub fn from_env(cfg: &LlmBackendConfig) -> Result<Self, BackendError> {
        match std::env::var(&cfg.api_key_env_var) {
            Ok(key) if !key.is_empty() => Ok(HttpChat::with_key(cfg, key)),
            _ => Err(BackendError::Auth(format!(
                "environment variable {} is not set",
                cfg.api_key_env_var
            ))),
        }
    }

    pub fn with_key(cfg: &LlmBackendConfig, api_key: impl Into<String>) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpChat {
            cfg: cfg.clone(),
            api_key: api_key.into(),
            agent,
        }
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/v1/chat/completions",
            self.cfg.base_url.trim_end_matches('/')
        )
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, Attempt> {
        let mut resp = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()));
        match status {
            200..=299 => response_content(&text?).map_err(Attempt::Fatal),
            401 | 403 => Err(Attempt::Fatal(BackendError::Auth(format!(
                "status {status}"
            )))),
            429 | 500..=599 => Err(Attempt::Retry(format!("status {status}"))),
            _ => Err(Attempt::Fatal(BackendError::Transport(format!(
                "status {status}"
            )))),
        }
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl ChatCompletion for HttpChat {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError> {
        let body = self.cfg.request_body(messages);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(content) => return Ok(content),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) if attempt < self.cfg.max_retries => {
                    let wait = self.cfg.backoff_for(attempt);
                    warn!(
                        "chat request failed ({reason}); retry {} in {wait} ms",
                        attempt + 1
                    );
                    thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
                Err(Attempt::Retry(reason)) => {
                    return Err(BackendError::Transport(format!(
                        "{reason} after {} retries",
                        self.cfg.max_retries
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CannedResponse {
    pub status: u16,
    pub body: String,
}

impl CannedResponse {
    pub fn ok(body: impl Into<String>) -> Self {
        CannedResponse {
            status: 200,
            body: body.into(),
        }
    }

    /// A 200 chat-completions body whose message content is `content`.
    pub fn chat(content: &str) -> Self {
        CannedResponse::ok(
            serde_json::json!({
                "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]
            })
            .to_string(),
        )
    }

    pub fn status(status: u16) -> Self {
        CannedResponse {
            status,
            body: String::from("{\"error\":\"canned\"}"),
        }
    }
}

/// Loads `*.json` files of `dir` in name order. A file holding
/// `{"status": N, "body": ...}` sets the status; any other JSON is served
/// as a 200 body.
pub fn load_canned_dir(dir: &Path) -> Result<Vec<CannedResponse>, FormatError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|source| FormatError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = read_text(&p)?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| FormatError::Document {
                path: p.clone(),
                message: e.to_string(),
            })?;
        let status = v.get("status").and_then(|s| s.as_u64());
        out.push(match (status, v.get("body")) {
            (Some(status), Some(body)) => CannedResponse {
                status: status as u16,
                body: body.as_str().map_or_else(|| body.to_string(), String::from),
            },
            _ => CannedResponse::ok(text),
        });
    }
    Ok(out)
}

/// A request the mock endpoint received.
#[derive(Debug, Clone)]
pub struct ReceivedRequest {
    pub path: String,
    pub authorization: Option<String>,
    pub body: String,
}

#[derive(Default)]
struct MockState {
    responses: Vec<CannedResponse>,
    next: usize,
    received: Vec<ReceivedRequest>,
}

/// Serves canned responses in order on 127.0.0.1; the last one repeats.
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<Mutex<MockState>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(responses: Vec<CannedResponse>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let state = Arc::new(Mutex::new(MockState {
            responses,
            ..MockState::default()
        }));
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let state = Arc::clone(&state);
            let stop = Arc::clone(&stop);
            thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    match conn {
                        Ok(stream) => {
                            if let Err(e) = serve(stream, &state) {
                                debug!("mock connection error: {e}");
                            }
                        }
                        Err(e) => debug!("mock accept error: {e}"),
                    }
                }
            })
        };
        Ok(MockServer {
            addr,
            state,
            stop,
            handle: Some(handle),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<ReceivedRequest> {
        self.state
            .lock()
            .map(|s| s.received.clone())
            .unwrap_or_default()
    }

    pub fn request_count(&self) -> usize {
        self.state
            .lock()
            .map(|s| s.received.len())
            .unwrap_or_default()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, state: &Mutex<MockState>) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(());
    }
    let path = request_line
        .split_whitespace()
        .nth(1)
        .unwrap_or("/")
        .to_string();
    let mut length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let value = value.trim();
            if name.eq_ignore_ascii_case("content-length") {
                length = value.parse().unwrap_or(0);
            } else if name.eq_ignore_ascii_case("authorization") {
                authorization = Some(value.to_string());
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;

    let reply = {
        let mut s = state.lock().expect("mock state");
        s.received.push(ReceivedRequest {
            path,
            authorization,
            body: String::from_utf8_lossy(&body).into_owned(),
        });
        let i = s.next.min(s.responses.len().saturating_sub(1));
        s.next += 1;
        s.responses
            .get(i)
            .cloned()
            .unwrap_or_else(|| CannedResponse::status(404))
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} Canned\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    )?;
    stream.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(base_url: String) -> LlmBackendConfig {
        LlmBackendConfig {
            base_url,
            max_retries: 3,
            backoff_ms: 1,
            timeout_secs: 5,
            ..LlmBackendConfig::default()
        }
    }

    fn hello() -> Vec<Message> {
        vec![Message::new("user", "hello")]
    }

    #[test]
    fn canned_reply_is_returned() {
        let server = MockServer::start(vec![CannedResponse::chat("[\"x\"]")]).unwrap();
        let mut chat = HttpChat::with_key(&cfg(server.base_url()), "k");
        assert_eq!(chat.complete(&hello()).unwrap(), "[\"x\"]");
        let reqs = server.requests();
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].path, "/v1/chat/completions");
        assert_eq!(reqs[0].authorization.as_deref(), Some("Bearer k"));
        let body: serde_json::Value = serde_json::from_str(&reqs[0].body).unwrap();
        assert_eq!(body["temperature"], 0.8);
        assert_eq!(body["messages"][0]["content"], "hello");
    }

    #[test]
    fn server_errors_are_retried() {
        let server = MockServer::start(vec![
            CannedResponse::status(500),
            CannedResponse::status(503),
            CannedResponse::chat("ok"),
        ])
        .unwrap();
        let mut chat = HttpChat::with_key(&cfg(server.base_url()), "k");
        assert_eq!(chat.complete(&hello()).unwrap(), "ok");
        assert_eq!(server.request_count(), 3);
    }

    #[test]
    fn retries_run_out() {
        let server = MockServer::start(vec![CannedResponse::status(429)]).unwrap();
        let mut c = cfg(server.base_url());
        c.max_retries = 1;
        let mut chat = HttpChat::with_key(&c, "k");
        assert!(matches!(
            chat.complete(&hello()),
            Err(BackendError::Transport(_))
        ));
        assert_eq!(server.request_count(), 2);
    }

    #[test]
    fn auth_failures_are_not_retried() {
        let server = MockServer::start(vec![CannedResponse::status(401)]).unwrap();
        let mut chat = HttpChat::with_key(&cfg(server.base_url()), "k");
        assert!(matches!(
            chat.complete(&hello()),
            Err(BackendError::Auth(_))
        ));
        assert_eq!(server.request_count(), 1);
    }

    #[test]
    fn malformed_body() {
        let server = MockServer::start(vec![CannedResponse::ok("{\"choices\": []}")]).unwrap();
        let mut chat = HttpChat::with_key(&cfg(server.base_url()), "k");
        assert!(matches!(
            chat.complete(&hello()),
            Err(BackendError::Malformed(_))
        ));
    }

    #[test]
    fn missing_key_variable() {
        let c = LlmBackendConfig {
            api_key_env_var: String::from("PROLEG_TEST_SURELY_UNSET_KEY"),
            ..LlmBackendConfig::default()
        };
        assert!(matches!(HttpChat::from_env(&c), Err(BackendError::Auth(_))));
    }

    #[test]
    fn canned_directory_order_and_status() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("02_ok.json"),
            r#"{"choices":[{"message":{"content":"hi"}}]}"#,
        )
        .unwrap();
        std::fs::write(
            dir.path().join("01_fail.json"),
            r#"{"status": 502, "body": {"error": "x"}}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let canned = load_canned_dir(dir.path()).unwrap();
        assert_eq!(canned.len(), 2);
        assert_eq!(canned[0].status, 502);
        assert_eq!(canned[0].body, r#"{"error":"x"}"#);
        assert_eq!(canned[1].status, 200);
    }
}
