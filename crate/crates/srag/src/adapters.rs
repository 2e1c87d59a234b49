//! Pluggable language-model backends.
//!
//! Two things are asked of a backend: an intrinsic-confidence estimate for
//! a query, and response generation for a chosen integration mode. The
//! [`MockAdapter`] answers both from a fixture file and is what the test
//! suite runs against; the [`RemoteAdapter`] speaks a small JSON protocol
//! to a local inference server. No test in this crate requires a live
//! backend.
//!
//! Remote wire protocol: `POST endpoint` with
//! `{"model": ..., "prompt": ..., "options": {}}`, response
//! `{"text": ..., "token_logprobs": [..]?}`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::integration::{DecisionVariant, ModelConfidence};

/// A language-model backend: confidence estimation plus generation.
///
/// Implementations must be safe for concurrent calls.
pub trait ModelAdapter: Send + Sync {
    /// Confidence that the model can answer `query` from intrinsic
    /// knowledge alone, in `[0, 1]`.
    fn model_confidence(&self, query: &str) -> Result<ModelConfidence>;

    /// Generate a response for `mode`. `context_docs` must be empty exactly
    /// when the mode is `IntrinsicOnly`; calling with `Unknown` is a
    /// contract violation (abstention produces no generation).
    fn generate_response(
        &self,
        query: &str,
        context_docs: &[&Document],
        mode: DecisionVariant,
    ) -> Result<String>;
}

fn check_generation_contract(context_docs: &[&Document], mode: DecisionVariant) -> Result<()> {
    match mode {
        DecisionVariant::Unknown => Err(Error::Validation(
            "generate_response called with Unknown mode".into(),
        )),
        DecisionVariant::IntrinsicOnly if !context_docs.is_empty() => Err(Error::Validation(
            "IntrinsicOnly generation must not receive context documents".into(),
        )),
        DecisionVariant::Combined | DecisionVariant::RetrievedOnly if context_docs.is_empty() => {
            Err(Error::Validation(format!(
                "{mode:?} generation requires context documents"
            )))
        }
        _ => Ok(()),
    }
}

// ─── Adapter construction ────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    Mock,
    Remote,
}

/// Declarative adapter selection, usually deserialized from config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub kind: AdapterKind,
    #[serde(default)]
    pub model_name: String,
    /// Remote only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Mock only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_path: Option<PathBuf>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_max_in_flight() -> usize {
    4
}

impl AdapterSpec {
    pub fn build(&self) -> Result<Box<dyn ModelAdapter>> {
        match self.kind {
            AdapterKind::Mock => {
                let path = self.fixture_path.as_ref().ok_or_else(|| Error::Config {
                    field: "adapter.fixture_path".into(),
                    message: "required when kind = \"mock\"".into(),
                })?;
                Ok(Box::new(MockAdapter::from_fixture(path)?))
            }
            AdapterKind::Remote => {
                let endpoint = self.endpoint.as_ref().ok_or_else(|| Error::Config {
                    field: "adapter.endpoint".into(),
                    message: "required when kind = \"remote\"".into(),
                })?;
                Ok(Box::new(RemoteAdapter::new(
                    endpoint.clone(),
                    self.model_name.clone(),
                    Duration::from_millis(self.timeout_ms),
                    self.max_in_flight.max(1),
                )))
            }
        }
    }
}

// ─── Mock adapter ────────────────────────────────────────────────────────────

/// One fixture line: `{"query": ..., "confidence": ..., "canned_answer": ...?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockFixtureEntry {
    pub query: String,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canned_answer: Option<String>,
}

/// Scripted adapter keyed by normalized query text (lowercased, whitespace
/// collapsed). Unknown queries get confidence 0.0. A pure function of
/// `(fixture, inputs)`.
pub struct MockAdapter {
    entries: HashMap<String, MockFixtureEntry>,
}

/// Lowercase and collapse runs of whitespace so fixture keys are
/// insensitive to spacing and case.
pub fn normalize_query(query: &str) -> String {
    query
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl MockAdapter {
    pub fn from_fixture(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: MockFixtureEntry =
                serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            if !(0.0..=1.0).contains(&entry.confidence) {
                return Err(Error::Validation(format!(
                    "{}:{}: confidence {} outside [0,1]",
                    path.display(),
                    i + 1,
                    entry.confidence
                )));
            }
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn from_entries(entries: Vec<MockFixtureEntry>) -> Self {
        MockAdapter {
            entries: entries
                .into_iter()
                .map(|e| (normalize_query(&e.query), e))
                .collect(),
        }
    }

    /// All-default mock: confidence 0.0 for every query, no canned answers.
    pub fn empty() -> Self {
        MockAdapter {
            entries: HashMap::new(),
        }
    }

    fn lookup(&self, query: &str) -> Option<&MockFixtureEntry> {
        self.entries.get(&normalize_query(query))
    }
}

fn doc_markers(context_docs: &[&Document]) -> String {
    context_docs
        .iter()
        .map(|d| format!("[{}]", d.doc_id))
        .collect::<Vec<_>>()
        .join(", ")
}

fn snippet(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

impl ModelAdapter for MockAdapter {
    fn model_confidence(&self, query: &str) -> Result<ModelConfidence> {
        let c = self.lookup(query).map_or(0.0, |e| e.confidence);
        ModelConfidence::new(c)
    }

    fn generate_response(
        &self,
        query: &str,
        context_docs: &[&Document],
        mode: DecisionVariant,
    ) -> Result<String> {
        check_generation_contract(context_docs, mode)?;
        let canned = self.lookup(query).and_then(|e| e.canned_answer.as_deref());
        Ok(match mode {
            DecisionVariant::IntrinsicOnly => {
                canned.unwrap_or("(no stored intrinsic answer)").to_string()
            }
            DecisionVariant::RetrievedOnly => format!(
                "According to {}: {}",
                doc_markers(context_docs),
                canned.unwrap_or_else(|| snippet(&context_docs[0].text, 80)),
            ),
            DecisionVariant::Combined => format!(
                "Reconciling stored knowledge with {}: {}",
                doc_markers(context_docs),
                canned.unwrap_or_else(|| snippet(&context_docs[0].text, 80)),
            ),
            DecisionVariant::Unknown => unreachable!("rejected by contract check"),
        })
    }
}

// ─── Remote adapter ──────────────────────────────────────────────────────────

#[derive(Serialize)]
struct RemoteRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    options: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct RemoteResponse {
    text: String,
    #[serde(default)]
    token_logprobs: Option<Vec<f64>>,
}

/// Counting semaphore bounding concurrent requests to the backend.
struct InFlightGate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl InFlightGate {
    fn new(limit: usize) -> Self {
        InFlightGate {
            slots: Mutex::new(limit),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightPermit<'_> {
        let mut slots = self.slots.lock().expect("gate lock");
        while *slots == 0 {
            slots = self.freed.wait(slots).expect("gate wait");
        }
        *slots -= 1;
        InFlightPermit { gate: self }
    }
}

struct InFlightPermit<'a> {
    gate: &'a InFlightGate,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        *self.gate.slots.lock().expect("gate lock") += 1;
        self.gate.freed.notify_one();
    }
}

/// HTTP client for a local inference server.
///
/// Confidence is estimated from the mean token log-likelihood of a short
/// self-answer, squashed through a logistic curve
/// `1 / (1 + exp(-(mean - center) / scale))` with `center = -2.5` and
/// `scale = 1.0`. Backends that return no `token_logprobs` are asked to
/// self-rate: the response text must parse as a number in `[0, 1]`.
pub struct RemoteAdapter {
    endpoint: String,
    model_name: String,
    agent: ureq::Agent,
    gate: InFlightGate,
    logistic_center: f64,
    logistic_scale: f64,
}

impl RemoteAdapter {
    pub fn new(
        endpoint: String,
        model_name: String,
        timeout: Duration,
        max_in_flight: usize,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteAdapter {
            endpoint,
            model_name,
            agent,
            gate: InFlightGate::new(max_in_flight),
            logistic_center: -2.5,
            logistic_scale: 1.0,
        }
    }

    fn call(&self, prompt: &str) -> Result<RemoteResponse> {
        let _permit = self.gate.acquire();
        let request = RemoteRequest {
            model: &self.model_name,
            prompt,
            options: serde_json::Map::new(),
        };
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .map_err(|e| Error::Adapter(format!("request to {} failed: {e}", self.endpoint)))?;
        if response.status() != 200 {
            return Err(Error::Adapter(format!(
                "backend {} returned status {}",
                self.endpoint,
                response.status()
            )));
        }
        response
            .body_mut()
            .read_json::<RemoteResponse>()
            .map_err(|e| Error::Adapter(format!("malformed backend response: {e}")))
    }

    fn squash(&self, mean_logprob: f64) -> f64 {
        1.0 / (1.0 + (-(mean_logprob - self.logistic_center) / self.logistic_scale).exp())
    }
}

impl ModelAdapter for RemoteAdapter {
    fn model_confidence(&self, query: &str) -> Result<ModelConfidence> {
        let prompt = format!(
            "Answer the following question in one short sentence.\n\nQuestion: {query}\nAnswer:"
        );
        let response = self.call(&prompt)?;
        let value = match response.token_logprobs.as_deref() {
            Some(lps) if !lps.is_empty() => {
                let mean = lps.iter().sum::<f64>() / lps.len() as f64;
                self.squash(mean)
            }
            _ => response.text.trim().parse::<f64>().map_err(|_| {
                Error::Adapter(format!(
                    "backend returned neither token_logprobs nor a numeric self-rating: {:?}",
                    snippet(&response.text, 60)
                ))
            })?,
        };
        ModelConfidence::new(value.clamp(0.0, 1.0))
    }

    fn generate_response(
        &self,
        query: &str,
        context_docs: &[&Document],
        mode: DecisionVariant,
    ) -> Result<String> {
        check_generation_contract(context_docs, mode)?;
        let mut prompt = String::new();
        match mode {
            DecisionVariant::IntrinsicOnly => {
                prompt.push_str("Answer from your own knowledge.\n\n");
            }
            DecisionVariant::RetrievedOnly => {
                prompt.push_str(
                    "Answer using only the documents below. Cite document ids in brackets.\n\n",
                );
            }
            DecisionVariant::Combined => {
                prompt.push_str(
                    "Reconcile your own knowledge with the documents below; prefer the \
                     documents when they conflict, and cite document ids in brackets.\n\n",
                );
            }
            DecisionVariant::Unknown => unreachable!("rejected by contract check"),
        }
        for doc in context_docs {
            prompt.push_str(&format!("[{}] {}\n", doc.doc_id, doc.text));
        }
        prompt.push_str(&format!("\nQuestion: {query}\nAnswer:"));
        Ok(self.call(&prompt)?.text)
    }
}
