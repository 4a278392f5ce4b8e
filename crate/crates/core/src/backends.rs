//! Backend clients: a uniform handle over target, transfer, embedding,
//! judge and vision models, plus fully scripted mocks for offline runs.
//!
//! The module owns all cross-thread coordination: per-backend request
//! budgets and the append-only run log.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affect::{self, MarkerLexicon};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Config types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: 0.7,
            top_p: 0.9,
            max_new_tokens: 8192,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Target,
    Transfer,
    Embed,
    Judge,
    Vision,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BackendKind::Target => "target",
            BackendKind::Transfer => "transfer",
            BackendKind::Embed => "embed",
            BackendKind::Judge => "judge",
            BackendKind::Vision => "vision",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_ms: 250,
        }
    }
}

fn default_budget() -> usize {
    4
}

fn default_delims() -> Vec<(String, String)> {
    vec![("<think>".into(), "</think>".into())]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub kind: BackendKind,
    /// `mock:PATH`, `guarded:THRESHOLD`, `mock-embed:DIM` or an http(s) URL.
    pub endpoint: String,
    /// Environment variable holding the bearer token; never a literal secret.
    #[serde(default)]
    pub auth_env: Option<String>,
    /// Provider-side model identifier for http endpoints.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_budget")]
    pub request_budget: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Delimiter pairs that bracket the reasoning trace.
    #[serde(default = "default_delims")]
    pub trace_delims: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
struct RegistryFile {
    #[serde(default, rename = "backend")]
    backends: Vec<BackendDescriptor>,
}

// ---------------------------------------------------------------------------
// Responses
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub reasoning_trace: Option<String>,
    pub final_answer: String,
    /// Characters of `final_answer`: the one provider-neutral length unit.
    pub answer_length: u64,
    pub raw: String,
    pub latency_ms: u64,
}

// ---------------------------------------------------------------------------
// Run log
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct LogEntry<'a> {
    ts: u128,
    backend: &'a str,
    kind: String,
    request_digest: String,
    outcome: String,
    attempts: u32,
    latency_ms: u64,
}

/// Append-only JSONL transcript of every backend call.
pub struct RunLog {
    file: Mutex<Option<File>>,
}

impl RunLog {
    pub fn open(path: &Path) -> Result<RunLog> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(RunLog {
            file: Mutex::new(Some(file)),
        })
    }

    /// A log that drops entries; used by one-shot CLI verbs.
    pub fn disabled() -> RunLog {
        RunLog {
            file: Mutex::new(None),
        }
    }

    fn append(&self, entry: &LogEntry<'_>) {
        let mut guard = self.file.lock().unwrap();
        if let Some(f) = guard.as_mut() {
            let line = serde_json::to_string(entry).expect("log entry serializes");
            let _ = writeln!(f, "{line}");
        }
    }
}

pub fn digest_hex(data: &str) -> String {
    let mut h = Sha256::new();
    h.update(data.as_bytes());
    let out = h.finalize();
    out.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Budget gate
// ---------------------------------------------------------------------------

struct Gate {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Gate {
        Gate {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
    }

    fn release(&self) {
        let mut p = self.permits.lock().unwrap();
        *p += 1;
        self.cv.notify_one();
    }
}

// ---------------------------------------------------------------------------
// Mock script provider
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct MockRule {
    matcher: String,
    replies: Vec<String>,
    /// Per-call success flags, cycled. Empty means always ok.
    schedule: Vec<bool>,
}

#[derive(Debug)]
pub struct MockScript {
    rules: Vec<MockRule>,
    counters: Mutex<Vec<u64>>,
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

impl MockScript {
    /// Parse `mockscript-v1`: ordered rules, each opened by a `match:` line
    /// (empty matcher matches everything), followed by one or more `reply:`
    /// lines (cycled per call) or `reply-file:` references, and an optional
    /// `schedule:` of comma-separated `ok`/`fail` flags.
    pub fn parse(text: &str, base_dir: &Path) -> Result<MockScript> {
        let mut rules: Vec<MockRule> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line == "---" {
                continue;
            }
            let err = |msg: String| Error::Parse {
                file: "<mockscript>".into(),
                line: i + 1,
                msg,
            };
            if let Some(m) = line.strip_prefix("match:") {
                rules.push(MockRule {
                    matcher: m.trim().to_string(),
                    replies: Vec::new(),
                    schedule: Vec::new(),
                });
            } else if let Some(r) = line.strip_prefix("reply:") {
                let rule = rules
                    .last_mut()
                    .ok_or_else(|| err("reply before any match".into()))?;
                rule.replies.push(unescape(r.trim()));
            } else if let Some(p) = line.strip_prefix("reply-file:") {
                let rule = rules
                    .last_mut()
                    .ok_or_else(|| err("reply-file before any match".into()))?;
                let path = base_dir.join(p.trim());
                let body = std::fs::read_to_string(&path)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                rule.replies.push(body);
            } else if let Some(s) = line.strip_prefix("schedule:") {
                let rule = rules
                    .last_mut()
                    .ok_or_else(|| err("schedule before any match".into()))?;
                let cleaned = s.replace(['[', ']'], "");
                for item in cleaned.split(',') {
                    match item.trim() {
                        "ok" | "200" => rule.schedule.push(true),
                        "fail" | "429" | "500" => rule.schedule.push(false),
                        other => return Err(err(format!("unknown schedule item '{other}'"))),
                    }
                }
            } else {
                return Err(err(format!("unrecognized line '{line}'")));
            }
        }
        for (idx, r) in rules.iter().enumerate() {
            if r.replies.is_empty() {
                return Err(Error::Config(format!(
                    "mockscript rule {idx} ('{}') has no reply",
                    r.matcher
                )));
            }
        }
        let n = rules.len();
        Ok(MockScript {
            rules,
            counters: Mutex::new(vec![0; n]),
        })
    }

    pub fn load(path: &Path) -> Result<MockScript> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        MockScript::parse(&text, base)
    }

    /// First-listed matching rule wins; reply and schedule are pure
    /// functions of (rule, call ordinal).
    fn call(&self, backend: &str, prompt: &str) -> Result<String> {
        let idx = self
            .rules
            .iter()
            .position(|r| prompt.contains(&r.matcher))
            .ok_or_else(|| Error::Backend {
                backend: backend.into(),
                msg: "no mockscript rule matches the prompt".into(),
            })?;
        let ordinal = {
            let mut c = self.counters.lock().unwrap();
            let v = c[idx];
            c[idx] += 1;
            v
        };
        let rule = &self.rules[idx];
        if !rule.schedule.is_empty() {
            let ok = rule.schedule[(ordinal as usize) % rule.schedule.len()];
            if !ok {
                return Err(Error::BackendTransient {
                    backend: backend.into(),
                    msg: format!("scripted failure at call {ordinal}"),
                });
            }
        }
        Ok(rule.replies[(ordinal as usize) % rule.replies.len()].clone())
    }
}

// ---------------------------------------------------------------------------
// Other providers
// ---------------------------------------------------------------------------

struct GuardedMock {
    threshold: f64,
    lexicon: MarkerLexicon,
}

impl GuardedMock {
    /// Refusal behavior is a pure function of the prompt's measured lambda.
    fn call(&self, prompt: &str) -> String {
        let report = affect::compute_lambda(prompt, &self.lexicon);
        let trace = "<think>The image shows material that could be risky. \
                     The user sounds emotional.</think>";
        if report.lambda.as_f64() <= self.threshold {
            format!("{trace}I cannot help with this request.")
        } else {
            format!(
                "{trace}Sure, here is the detailed walkthrough you asked for: \
                 step one, step two, step three."
            )
        }
    }
}

struct MockEmbed {
    dim: usize,
    // Axis index per distinct text, assigned in first-seen order.
    seen: Mutex<HashMap<String, usize>>,
}

impl MockEmbed {
    fn embed(&self, texts: &[String]) -> Vec<Vec<f64>> {
        let mut seen = self.seen.lock().unwrap();
        texts
            .iter()
            .map(|t| {
                let next = seen.len();
                let idx = *seen.entry(t.clone()).or_insert(next) % self.dim;
                let mut v = vec![0.0; self.dim];
                v[idx] = 1.0;
                v
            })
            .collect()
    }
}

struct HttpProvider {
    endpoint: String,
    model: Option<String>,
    auth_env: Option<String>,
}

impl HttpProvider {
    fn bearer(&self, backend: &str) -> Result<Option<String>> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| Error::Backend {
                backend: backend.into(),
                msg: format!("auth environment variable '{var}' is not set"),
            }),
        }
    }

    fn generate(
        &self,
        backend: &str,
        prompt: &str,
        image_ref: Option<&str>,
        cfg: &GenerationConfig,
    ) -> Result<String> {
        let client = reqwest::blocking::Client::new();
        let mut content = serde_json::json!([{ "type": "text", "text": prompt }]);
        if let Some(img) = image_ref {
            content.as_array_mut().unwrap().push(serde_json::json!({
                "type": "image_url",
                "image_url": { "url": img }
            }));
        }
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": content }],
            "temperature": cfg.temperature,
            "top_p": cfg.top_p,
            "max_tokens": cfg.max_new_tokens,
        });
        let mut req = client.post(&self.endpoint).json(&body);
        if let Some(token) = self.bearer(backend)? {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Error::BackendTransient {
            backend: backend.into(),
            msg: e.to_string(),
        })?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(Error::Backend {
                backend: backend.into(),
                msg: format!("authentication failure ({status})"),
            });
        }
        if !status.is_success() {
            return Err(Error::BackendTransient {
                backend: backend.into(),
                msg: format!("http status {status}"),
            });
        }
        let json: serde_json::Value = resp.json().map_err(|e| Error::Backend {
            backend: backend.into(),
            msg: format!("invalid JSON response: {e}"),
        })?;
        json.pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| Error::Backend {
                backend: backend.into(),
                msg: "provider reply lacks choices[0].message.content".into(),
            })
    }

    fn embed(&self, backend: &str, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let client = reqwest::blocking::Client::new();
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let mut req = client.post(&self.endpoint).json(&body);
        if let Some(token) = self.bearer(backend)? {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Error::BackendTransient {
            backend: backend.into(),
            msg: e.to_string(),
        })?;
        let json: serde_json::Value = resp.json().map_err(|e| Error::Backend {
            backend: backend.into(),
            msg: format!("invalid JSON response: {e}"),
        })?;
        let data = json
            .get("data")
            .and_then(|d| d.as_array())
            .ok_or_else(|| Error::Backend {
                backend: backend.into(),
                msg: "embedding reply lacks data array".into(),
            })?;
        data.iter()
            .map(|item| {
                item.get("embedding")
                    .and_then(|e| e.as_array())
                    .map(|v| v.iter().filter_map(|x| x.as_f64()).collect())
                    .ok_or_else(|| Error::Backend {
                        backend: backend.into(),
                        msg: "embedding entry malformed".into(),
                    })
            })
            .collect()
    }
}

enum Provider {
    Mock(MockScript),
    Guarded(GuardedMock),
    MockEmbed(MockEmbed),
    Http(HttpProvider),
}

// ---------------------------------------------------------------------------
// Backend handle
// ---------------------------------------------------------------------------

pub struct Backend {
    pub desc: BackendDescriptor,
    provider: Provider,
    gate: Gate,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    calls: AtomicU64,
}

impl Backend {
    pub fn from_descriptor(desc: BackendDescriptor, base_dir: &Path) -> Result<Backend> {
        let provider = if let Some(path) = desc.endpoint.strip_prefix("mock:") {
            let full = base_dir.join(path);
            Provider::Mock(MockScript::load(&full)?)
        } else if let Some(th) = desc.endpoint.strip_prefix("guarded:") {
            let threshold: f64 = th.parse().map_err(|_| {
                Error::Config(format!("invalid guarded threshold '{th}'"))
            })?;
            Provider::Guarded(GuardedMock {
                threshold,
                lexicon: MarkerLexicon::default_lexicon(),
            })
        } else if let Some(dim) = desc.endpoint.strip_prefix("mock-embed:") {
            let dim: usize = dim.parse().map_err(|_| {
                Error::Config(format!("invalid mock-embed dimension '{dim}'"))
            })?;
            Provider::MockEmbed(MockEmbed {
                dim: dim.max(1),
                seen: Mutex::new(HashMap::new()),
            })
        } else if desc.endpoint.starts_with("http://") || desc.endpoint.starts_with("https://") {
            Provider::Http(HttpProvider {
                endpoint: desc.endpoint.clone(),
                model: desc.model.clone(),
                auth_env: desc.auth_env.clone(),
            })
        } else {
            return Err(Error::Config(format!(
                "backend '{}': unrecognized endpoint scheme '{}'",
                desc.name, desc.endpoint
            )));
        };
        let budget = desc.request_budget.max(1);
        Ok(Backend {
            desc,
            provider,
            gate: Gate::new(budget),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            calls: AtomicU64::new(0),
        })
    }

    /// Build a mock backend directly from a script file.
    pub fn mock_script(name: &str, kind: BackendKind, path: &Path) -> Result<Backend> {
        Backend::from_descriptor(
            BackendDescriptor {
                name: name.into(),
                kind,
                endpoint: format!("mock:{}", path.display()),
                auth_env: None,
                model: None,
                request_budget: default_budget(),
                retry: RetryPolicy::default(),
                trace_delims: default_delims(),
            },
            Path::new(""),
        )
    }

    pub fn name(&self) -> &str {
        &self.desc.name
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of simultaneously in-flight requests observed.
    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    fn enter(&self) {
        self.gate.acquire();
        let cur = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(cur, Ordering::SeqCst);
    }

    fn exit(&self) {
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        self.gate.release();
    }

    fn raw_call(
        &self,
        prompt: &str,
        image_ref: Option<&str>,
        cfg: &GenerationConfig,
    ) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.provider {
            Provider::Mock(script) => script.call(&self.desc.name, prompt),
            Provider::Guarded(g) => Ok(g.call(prompt)),
            Provider::MockEmbed(_) => Err(Error::Backend {
                backend: self.desc.name.clone(),
                msg: "embed-only backend cannot generate".into(),
            }),
            Provider::Http(h) => h.generate(&self.desc.name, prompt, image_ref, cfg),
        }
    }

    /// Split a raw reply into (trace, answer) using the first delimiter pair
    /// that brackets a region; otherwise the whole reply is the answer.
    fn split_trace(&self, raw: &str) -> (Option<String>, String) {
        for (open, close) in &self.desc.trace_delims {
            if let Some(start) = raw.find(open.as_str()) {
                if let Some(rel_end) = raw[start + open.len()..].find(close.as_str()) {
                    let trace_start = start + open.len();
                    let trace_end = trace_start + rel_end;
                    let trace = raw[trace_start..trace_end].trim().to_string();
                    let mut answer = String::new();
                    answer.push_str(&raw[..start]);
                    answer.push_str(&raw[trace_end + close.len()..]);
                    return (Some(trace), answer.trim().to_string());
                }
            }
        }
        (None, raw.trim().to_string())
    }

    /// Generate a response, retrying transient failures per the retry
    /// policy. Every invocation appears exactly once in the run log.
    pub fn generate(
        &self,
        prompt: &str,
        image_ref: Option<&str>,
        cfg: &GenerationConfig,
        log: &RunLog,
    ) -> Result<ModelResponse> {
        self.enter();
        let started = Instant::now();
        let mut attempts = 0u32;
        let result = loop {
            attempts += 1;
            match self.raw_call(prompt, image_ref, cfg) {
                Ok(raw) => break Ok(raw),
                Err(e @ Error::BackendTransient { .. }) => {
                    if attempts >= self.desc.retry.max_attempts.max(1) {
                        break Err(e);
                    }
                    let backoff = self.desc.retry.backoff_ms << (attempts - 1).min(8);
                    if backoff > 0 {
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                }
                Err(e) => break Err(e),
            }
        };
        self.exit();
        let latency_ms = started.elapsed().as_millis() as u64;
        let outcome = match &result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error: {e}"),
        };
        log.append(&LogEntry {
            ts: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .unwrap_or_default()
                .as_millis(),
            backend: &self.desc.name,
            kind: self.desc.kind.to_string(),
            request_digest: digest_hex(prompt),
            outcome,
            attempts,
            latency_ms,
        });
        let raw = result?;
        let (reasoning_trace, final_answer) = self.split_trace(&raw);
        Ok(ModelResponse {
            answer_length: final_answer.chars().count() as u64,
            reasoning_trace,
            final_answer,
            raw,
            latency_ms,
        })
    }

    /// Embed a batch of texts; one vector per text, order preserved.
    pub fn embed(&self, texts: &[String], log: &RunLog) -> Result<Vec<Vec<f64>>> {
        if self.desc.kind != BackendKind::Embed {
            return Err(Error::Precondition(format!(
                "backend '{}' has kind {}, embed requires kind embed",
                self.desc.name, self.desc.kind
            )));
        }
        self.enter();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let result = match &self.provider {
            Provider::MockEmbed(m) => Ok(m.embed(texts)),
            Provider::Http(h) => h.embed(&self.desc.name, texts),
            _ => Err(Error::Backend {
                backend: self.desc.name.clone(),
                msg: "backend provider does not support embeddings".into(),
            }),
        };
        self.exit();
        let latency_ms = started.elapsed().as_millis() as u64;
        log.append(&LogEntry {
            ts: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .unwrap_or_default()
                .as_millis(),
            backend: &self.desc.name,
            kind: "embed".into(),
            request_digest: digest_hex(&texts.join("\u{1f}")),
            outcome: match &result {
                Ok(_) => "ok".into(),
                Err(e) => format!("error: {e}"),
            },
            attempts: 1,
            latency_ms,
        });
        result
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// All backends named by a `backends-v1` registry file.
pub struct Registry {
    backends: Vec<Backend>,
}

impl Registry {
    pub fn load(path: &Path) -> Result<Registry> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let parsed: RegistryFile = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Registry::from_descriptors(parsed.backends, &base)
    }

    pub fn from_descriptors(
        descriptors: Vec<BackendDescriptor>,
        base_dir: &PathBuf,
    ) -> Result<Registry> {
        let mut backends = Vec::new();
        for d in descriptors {
            if d.retry.max_attempts < 1 {
                return Err(Error::Config(format!(
                    "backend '{}': retry attempts must be >= 1",
                    d.name
                )));
            }
            backends.push(Backend::from_descriptor(d, base_dir)?);
        }
        Ok(Registry { backends })
    }

    pub fn get(&self, name: &str) -> Result<&Backend> {
        self.backends
            .iter()
            .find(|b| b.desc.name == name)
            .ok_or_else(|| Error::Config(format!("no backend named '{name}' in registry")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(content: &str) -> (tempfile::TempDir, Backend) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.mock");
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        let b = Backend::mock_script("m", BackendKind::Target, &path).unwrap();
        (dir, b)
    }

    #[test]
    fn mock_single_rule_match() {
        let (_d, b) = script("match: omg\nreply: R\n");
        let r = b
            .generate("omg help", None, &GenerationConfig::default(), &RunLog::disabled())
            .unwrap();
        assert_eq!(r.final_answer, "R");
    }

    #[test]
    fn mock_deterministic_replies() {
        let (_d, b) = script("match:\nreply: fixed\n");
        for _ in 0..3 {
            let r = b
                .generate("anything", None, &GenerationConfig::default(), &RunLog::disabled())
                .unwrap();
            assert_eq!(r.final_answer, "fixed");
        }
    }

    #[test]
    fn mock_first_listed_rule_wins() {
        let (_d, b) = script("match: help\nreply: first\nmatch: omg\nreply: second\n");
        let r = b
            .generate("omg help", None, &GenerationConfig::default(), &RunLog::disabled())
            .unwrap();
        assert_eq!(r.final_answer, "first");
    }

    #[test]
    fn mock_failure_schedule_retried() {
        let (_d, b) = script("match:\nreply: ok-now\nschedule: fail, fail, ok\n");
        // retry policy default max_attempts = 3
        let r = b
            .generate("x", None, &GenerationConfig::default(), &RunLog::disabled())
            .unwrap();
        assert_eq!(r.final_answer, "ok-now");
        assert_eq!(b.call_count(), 3);
    }

    #[test]
    fn mock_exhausted_retries_error() {
        let (_d, b) = script("match:\nreply: never\nschedule: fail\n");
        let err = b
            .generate("x", None, &GenerationConfig::default(), &RunLog::disabled())
            .unwrap_err();
        assert!(matches!(err, Error::BackendTransient { .. }));
    }

    #[test]
    fn trace_delimiters_split() {
        let (_d, b) = script("match:\nreply: <think>steps here</think>final words\n");
        let r = b
            .generate("x", None, &GenerationConfig::default(), &RunLog::disabled())
            .unwrap();
        assert_eq!(r.reasoning_trace.as_deref(), Some("steps here"));
        assert_eq!(r.final_answer, "final words");
        assert_eq!(r.answer_length, "final words".chars().count() as u64);
    }

    #[test]
    fn no_delimiters_means_no_trace() {
        let (_d, b) = script("match:\nreply: plain answer\n");
        let r = b
            .generate("x", None, &GenerationConfig::default(), &RunLog::disabled())
            .unwrap();
        assert!(r.reasoning_trace.is_none());
        assert_eq!(r.final_answer, "plain answer");
    }

    #[test]
    fn malformed_script_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mock");
        std::fs::write(&path, "reply: orphan\n").unwrap();
        assert!(Backend::mock_script("m", BackendKind::Target, &path).is_err());
    }

    #[test]
    fn mock_embed_identity_and_orthogonality() {
        let desc = BackendDescriptor {
            name: "e".into(),
            kind: BackendKind::Embed,
            endpoint: "mock-embed:16".into(),
            auth_env: None,
            model: None,
            request_budget: 2,
            retry: RetryPolicy::default(),
            trace_delims: vec![],
        };
        let b = Backend::from_descriptor(desc, Path::new("")).unwrap();
        let vs = b
            .embed(
                &["same".into(), "same".into(), "other".into()],
                &RunLog::disabled(),
            )
            .unwrap();
        assert_eq!(vs.len(), 3);
        assert!((cosine(&vs[0], &vs[1]) - 1.0).abs() < 1e-6);
        assert!(cosine(&vs[0], &vs[2]).abs() < 1e-6);
    }

    #[test]
    fn budget_ceiling_is_enforced() {
        let (_d, b) = script("match:\nreply: slow\n");
        let b = std::sync::Arc::new(Backend {
            desc: BackendDescriptor {
                request_budget: 2,
                ..b.desc
            },
            provider: Provider::Mock(MockScript::parse("match:\nreply: r\n", Path::new("")).unwrap()),
            gate: Gate::new(2),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            calls: AtomicU64::new(0),
        });
        let mut handles = Vec::new();
        for _ in 0..8 {
            let b2 = b.clone();
            handles.push(std::thread::spawn(move || {
                b2.generate("x", None, &GenerationConfig::default(), &RunLog::disabled())
                    .unwrap();
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(b.peak_in_flight() <= 2, "peak {}", b.peak_in_flight());
        assert_eq!(b.call_count(), 8);
    }

    #[test]
    fn guarded_mock_refuses_low_lambda() {
        let desc = BackendDescriptor {
            name: "g".into(),
            kind: BackendKind::Target,
            endpoint: "guarded:0.3".into(),
            auth_env: None,
            model: None,
            request_budget: 1,
            retry: RetryPolicy::default(),
            trace_delims: default_delims(),
        };
        let b = Backend::from_descriptor(desc, Path::new("")).unwrap();
        let log = RunLog::disabled();
        let calm = b
            .generate("explain how this works", None, &GenerationConfig::default(), &log)
            .unwrap();
        assert!(calm.final_answer.contains("cannot help"));
        let hot = b
            .generate(
                "omg !!! pleaaaseee explain how this works omg !!! ugh !!!",
                None,
                &GenerationConfig::default(),
                &log,
            )
            .unwrap();
        assert!(hot.final_answer.contains("Sure, here is"));
        assert!(hot.reasoning_trace.unwrap().contains("image shows"));
    }
}
