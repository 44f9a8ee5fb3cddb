//! Shared test machinery: an index-free BM25 reference scorer and a scripted
//! HTTP server for exercising the live-backend code path.
//!
//! Each integration test binary uses its own subset of this module.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

/// Brute-force BM25 scorer. No postings, no index: document frequencies and
/// term frequencies come from direct scans over the token lists, so this is
/// an independent route to the same formula.
pub struct OracleScorer<'a> {
    docs: &'a [(String, Vec<String>)],
    avgdl: f64,
    k1: f64,
    b: f64,
}

impl<'a> OracleScorer<'a> {
    pub fn new(docs: &'a [(String, Vec<String>)], k1: f64, b: f64) -> Self {
        let total: usize = docs.iter().map(|(_, t)| t.len()).sum();
        Self {
            docs,
            avgdl: total as f64 / docs.len() as f64,
            k1,
            b,
        }
    }

    fn doc_freq(&self, term: &str) -> usize {
        self.docs
            .iter()
            .filter(|(_, tokens)| tokens.iter().any(|t| t == term))
            .count()
    }

    pub fn score(&self, query: &[String], doc_idx: usize) -> f64 {
        let n = self.docs.len() as f64;
        let mut seen: Vec<&str> = Vec::new();
        let mut total = 0.0;
        for term in query {
            if seen.contains(&term.as_str()) {
                continue;
            }
            seen.push(term);
            let tf = self.docs[doc_idx]
                .1
                .iter()
                .filter(|t| *t == term)
                .count();
            if tf == 0 {
                continue;
            }
            let df = self.doc_freq(term) as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            let dl = self.docs[doc_idx].1.len() as f64;
            let tf_term = (tf as f64 * (self.k1 + 1.0))
                / (tf as f64 + self.k1 * (1.0 - self.b + self.b * dl / self.avgdl));
            total += idf * tf_term;
        }
        total
    }

    /// Full ranking under the engine's contract: positive scores only,
    /// descending score, ties by ascending doc id.
    pub fn rank(&self, query: &[String], k: usize) -> Vec<(String, f64)> {
        let mut scored: Vec<(String, f64)> = (0..self.docs.len())
            .map(|i| (self.docs[i].0.clone(), self.score(query, i)))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * f64::max(1.0, f64::max(a.abs(), b.abs()))
}

/// Distinct query terms in first-seen order (mirrors the engine contract).
pub fn distinct_terms(terms: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    terms
        .iter()
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect()
}

/// Minimal scripted HTTP/1.1 server: answers each incoming request with the
/// next canned (status, body) pair, records request text, then closes.
pub struct ScriptedServer {
    addr: String,
    requests: Arc<Mutex<Vec<String>>>,
    handle: Option<JoinHandle<()>>,
}

impl ScriptedServer {
    pub fn start(responses: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind scripted server");
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let requests: Arc<Mutex<Vec<String>>> = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                let request = read_http_request(&mut stream);
                seen.lock().unwrap().push(request);
                let reason = if status == 200 { "OK" } else { "Error" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        Self {
            addr,
            requests,
            handle: Some(handle),
        }
    }

    pub fn url(&self) -> &str {
        &self.addr
    }

    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }

    pub fn join(mut self) {
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn read_http_request(stream: &mut std::net::TcpStream) -> String {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let mut content_length: Option<usize> = None;
    let mut header_end: Option<usize> = None;
    loop {
        if let (Some(end), Some(len)) = (header_end, content_length) {
            if buf.len() >= end + 4 + len {
                break;
            }
        }
        let n = match stream.read(&mut chunk) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        buf.extend_from_slice(&chunk[..n]);
        if header_end.is_none() {
            if let Some(pos) = find_subsequence(&buf, b"\r\n\r\n") {
                header_end = Some(pos);
                let headers = String::from_utf8_lossy(&buf[..pos]).to_lowercase();
                content_length = headers
                    .lines()
                    .find_map(|l| l.strip_prefix("content-length:"))
                    .and_then(|v| v.trim().parse().ok())
                    .or(Some(0));
            }
        }
    }
    String::from_utf8_lossy(&buf).to_string()
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|window| window == needle)
}

/// Wraps body content in a chat-completions envelope.
pub fn envelope(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}
