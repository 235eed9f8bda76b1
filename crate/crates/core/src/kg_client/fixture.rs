//! A scripted SPARQL endpoint on a local port, speaking the standard JSON
//! results format. Used by tests and offline demos.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub enum Reply {
    Json(String),
    Status(u16),
    Delay(Duration, Box<Reply>),
    /// Fails with the given status `times` times, then answers.
    Flaky { status: u16, times: usize, then: Box<Reply> },
}

impl Reply {
    pub fn boolean(value: bool) -> Self {
        Reply::Json(json!({"head": {}, "boolean": value}).to_string())
    }

    /// SELECT result; each row lists one binding object per variable, `Null`
    /// for unbound.
    pub fn select(vars: &[&str], rows: Vec<Vec<Value>>) -> Self {
        let bindings: Vec<Value> = rows
            .into_iter()
            .map(|row| {
                Value::Object(
                    vars.iter()
                        .zip(row)
                        .filter(|(_, v)| !v.is_null())
                        .map(|(k, v)| (k.to_string(), v))
                        .collect(),
                )
            })
            .collect();
        Reply::Json(json!({"head": {"vars": vars}, "results": {"bindings": bindings}}).to_string())
    }

    pub fn iris(var: &str, iris: &[&str]) -> Self {
        Self::select(&[var], iris.iter().map(|i| vec![uri(i)]).collect())
    }

    pub fn empty(var: &str) -> Self {
        Self::select(&[var], Vec::new())
    }
}

pub fn uri(iri: &str) -> Value {
    json!({"type": "uri", "value": iri})
}

pub fn literal(value: &str) -> Value {
    json!({"type": "literal", "value": value})
}

pub fn lang_literal(value: &str, lang: &str) -> Value {
    json!({"type": "literal", "value": value, "xml:lang": lang})
}

pub fn typed_literal(value: &str, datatype: &str) -> Value {
    json!({"type": "literal", "value": value, "datatype": datatype})
}

/// Whitespace-insensitive lookup key for scripted queries.
pub fn script_key(query: &str) -> String {
    query.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone)]
pub struct FixtureScript {
    replies: HashMap<String, Reply>,
    default: Reply,
}

impl Default for FixtureScript {
    fn default() -> Self {
        FixtureScript { replies: HashMap::new(), default: Reply::Status(400) }
    }
}

impl FixtureScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on(mut self, query: &str, reply: Reply) -> Self {
        self.replies.insert(script_key(query), reply);
        self
    }

    pub fn insert(&mut self, query: &str, reply: Reply) {
        self.replies.insert(script_key(query), reply);
    }

    /// Reply for unscripted queries; a 400 rejection unless changed.
    pub fn otherwise(mut self, reply: Reply) -> Self {
        self.default = reply;
        self
    }
}

struct Shared {
    script: FixtureScript,
    total: AtomicUsize,
    per_query: Mutex<HashMap<String, usize>>,
    stop: AtomicBool,
}

pub struct FixtureEndpoint {
    addr: SocketAddr,
    shared: Arc<Shared>,
    server: Option<JoinHandle<()>>,
}

impl FixtureEndpoint {
    pub fn start(script: FixtureScript) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            script,
            total: AtomicUsize::new(0),
            per_query: Mutex::new(HashMap::new()),
            stop: AtomicBool::new(false),
        });
        let s = shared.clone();
        let server = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if s.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let s = s.clone();
                std::thread::spawn(move || {
                    if let Err(e) = serve(conn, &s) {
                        log::debug!("fixture connection error: {e}");
                    }
                });
            }
        });
        Ok(FixtureEndpoint { addr, shared, server: Some(server) })
    }

    pub fn url(&self) -> String {
        format!("http://{}/sparql", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.shared.total.load(Ordering::SeqCst)
    }

    pub fn requests_for(&self, query: &str) -> usize {
        self.shared.per_query.lock().unwrap().get(&script_key(query)).copied().unwrap_or(0)
    }
}

impl Drop for FixtureEndpoint {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.server.take() {
            let _ = h.join();
        }
    }
}

fn serve(conn: TcpStream, shared: &Shared) -> std::io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let target = parts.next().unwrap_or_default().to_string();
    let mut content_length = 0;
    let mut content_type = String::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            match k.trim().to_ascii_lowercase().as_str() {
                "content-length" => content_length = v.trim().parse().unwrap_or(0),
                "content-type" => content_type = v.trim().to_ascii_lowercase(),
                _ => {}
            }
        }
    }
    if method.is_empty() {
        return Ok(());
    }
    let mut body = vec![0; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body).into_owned();

    let from_pairs = |s: &str| {
        url::form_urlencoded::parse(s.as_bytes()).find(|(k, _)| k == "query").map(|(_, v)| v.into_owned())
    };
    let query = match target.split_once('?') {
        Some((_, qs)) => from_pairs(qs),
        None => None,
    }
    .or_else(|| match method.as_str() {
        "POST" if content_type.starts_with("application/sparql-query") => Some(body.clone()),
        "POST" => from_pairs(&body),
        _ => None,
    });

    let mut conn = conn;
    let Some(query) = query else {
        return respond(&mut conn, 400, "missing query parameter");
    };
    let key = script_key(&query);
    shared.total.fetch_add(1, Ordering::SeqCst);
    let seen = {
        let mut per = shared.per_query.lock().unwrap();
        let n = per.entry(key.clone()).or_default();
        *n += 1;
        *n
    };
    let mut reply = shared.script.replies.get(&key).unwrap_or(&shared.script.default);
    loop {
        match reply {
            Reply::Json(text) => return respond(&mut conn, 200, text),
            Reply::Status(code) => return respond(&mut conn, *code, "scripted failure"),
            Reply::Delay(d, inner) => {
                std::thread::sleep(*d);
                reply = inner;
            }
            Reply::Flaky { status, times, then } => {
                if seen <= *times {
                    return respond(&mut conn, *status, "scripted transient failure");
                }
                reply = then;
            }
        }
    }
}

fn respond(conn: &mut TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        408 => "Request Timeout",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let content_type = if status == 200 { "application/sparql-results+json" } else { "text/plain" };
    write!(
        conn,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    conn.flush()
}
