//! Knowledge-integration protocol: adaptive thresholds, the four-way
//! decision rule, the abstention estimator, and the end-to-end pipeline.
//!
//! The decision rule compares the best retrieval score `s_max` against the
//! retrieval threshold `t_r` and the model's intrinsic confidence `c_m`
//! against the model threshold `t_m`:
//!
//! | retrieval | model | outcome        |
//! |-----------|-------|----------------|
//! | fail      | pass  | IntrinsicOnly  |
//! | pass      | pass  | Combined       |
//! | pass      | fail  | RetrievedOnly  |
//! | fail      | fail  | Unknown        |
//!
//! Equality at a threshold counts as passing, which biases ties toward
//! answering with evidence rather than abstaining. Abstentions are logged
//! and surfaced as an explicit `Unknown` answer, never as generated text.
//!
//! Thresholds adapt to query complexity: `t = base + k * (sigma - 1)`,
//! clamped to `[0, 1]`, where `sigma` is the query's token count relative
//! to a configured baseline. A per-domain additive offset can shift both
//! thresholds.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::adapters::ModelAdapter;
use crate::corpus::{rate_source, Corpus, Document, RatingPolicy};
use crate::embedding::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::relevance::{
    filter_by_threshold, normalize_scores, rank_candidates, RelevanceWeights, ScoredDocument,
};
use crate::retrieval::{retrieve_top_n, VectorIndex};
use crate::timing::{LatencyBreakdown, StageTimer, TimingMode};

// ─── Threshold machinery ─────────────────────────────────────────────────────

/// Base thresholds and complexity slopes for retrieval (`r`) and model (`m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_r_base: f64,
    pub t_m_base: f64,
    pub k_r: f64,
    pub k_m: f64,
}

impl Thresholds {
    pub fn new(t_r_base: f64, t_m_base: f64, k_r: f64, k_m: f64) -> Result<Self> {
        let t = Thresholds {
            t_r_base,
            t_m_base,
            k_r,
            k_m,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("t_r_base", self.t_r_base), ("t_m_base", self.t_m_base)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config {
                    field: format!("thresholds.{field}"),
                    message: format!("value {v} outside [0,1]"),
                });
            }
        }
        for (field, v) in [("k_r", self.k_r), ("k_m", self.k_m)] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Config {
                    field: format!("thresholds.{field}"),
                    message: format!("slope {v} must be >= 0"),
                });
            }
        }
        Ok(())
    }

    /// Effective `(t_r, t_m)` for a query of complexity `sigma`, shifted by
    /// the domain offset and clamped to `[0, 1]`.
    pub fn effective(&self, sigma: QueryComplexity, domain_offset: f64) -> (f64, f64) {
        let t_r =
            (adjust_threshold(self.t_r_base, self.k_r, sigma) + domain_offset).clamp(0.0, 1.0);
        let t_m =
            (adjust_threshold(self.t_m_base, self.k_m, sigma) + domain_offset).clamp(0.0, 1.0);
        (t_r, t_m)
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            t_r_base: 0.5,
            t_m_base: 0.5,
            k_r: 0.1,
            k_m: 0.1,
        }
    }
}

/// Query complexity factor; `sigma = 1` is a baseline-complexity query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryComplexity {
    pub sigma: f64,
}

/// Token-ratio complexity: whitespace-token count over `baseline_tokens`,
/// clamped to `[0, sigma_max]`.
pub fn query_complexity(
    query: &str,
    baseline_tokens: usize,
    sigma_max: f64,
) -> Result<QueryComplexity> {
    let tokens = query.split_whitespace().count();
    if tokens == 0 {
        return Err(Error::Validation("query has no tokens".into()));
    }
    if baseline_tokens == 0 {
        return Err(Error::Validation("baseline_tokens must be >= 1".into()));
    }
    let sigma = (tokens as f64 / baseline_tokens as f64).clamp(0.0, sigma_max);
    Ok(QueryComplexity { sigma })
}

/// `clamp(base + k * (sigma - 1), 0, 1)`. At `sigma = 1` this returns
/// `base` exactly for any slope.
pub fn adjust_threshold(base: f64, k: f64, sigma: QueryComplexity) -> f64 {
    (base + k * (sigma.sigma - 1.0)).clamp(0.0, 1.0)
}

// ─── Decision rule ───────────────────────────────────────────────────────────

/// Intrinsic-knowledge confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfidence(f64);

impl ModelConfidence {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Validation(format!(
                "model confidence {value} outside [0,1]"
            )));
        }
        Ok(ModelConfidence(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// The four response modes of the integration protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionVariant {
    /// Answer from model parameters alone (retrieval failed, model passed).
    IntrinsicOnly,
    /// Answer from retrieved context reconciled with intrinsic knowledge.
    Combined,
    /// Answer strictly from retrieved context (model confidence failed).
    RetrievedOnly,
    /// Abstain: neither source passed its threshold.
    Unknown,
}

/// Pick the response mode. Equality counts as passing on both comparisons.
/// `s_max` may be `f64::NEG_INFINITY`, the surrogate for "no candidates
/// retrieved", which never passes.
pub fn decide(s_max: f64, c_m: ModelConfidence, t_r: f64, t_m: f64) -> DecisionVariant {
    let retrieval_pass = s_max >= t_r;
    let model_pass = c_m.value() >= t_m;
    match (retrieval_pass, model_pass) {
        (false, true) => DecisionVariant::IntrinsicOnly,
        (true, true) => DecisionVariant::Combined,
        (true, false) => DecisionVariant::RetrievedOnly,
        (false, false) => DecisionVariant::Unknown,
    }
}

/// A fully resolved integration decision, kept on every response for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub variant: DecisionVariant,
    /// Best raw composite score; `None` when retrieval returned nothing.
    pub s_max: Option<f64>,
    pub c_m: f64,
    pub t_r: f64,
    pub t_m: f64,
    /// Documents handed to generation; empty for `IntrinsicOnly` and
    /// `Unknown`.
    pub context_doc_ids: Vec<String>,
}

// ─── Abstention estimation ───────────────────────────────────────────────────

/// Empirical abstention probabilities over a batch of `(s_max, c_m)`
/// observations. Counts are the source of truth; the probability fields are
/// their exact single-division projections, so
/// `answered = retrieval_pass + model_pass - joint_pass` and
/// `unknown = total - answered` hold as integer identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstentionEstimate {
    pub total: usize,
    pub retrieval_pass: usize,
    pub model_pass: usize,
    pub joint_pass: usize,
    pub answered: usize,
    pub unknown: usize,
    pub p_retrieval_pass: f64,
    pub p_model_pass: f64,
    pub p_joint_pass: f64,
    pub p_answer: f64,
    pub p_unknown: f64,
}

/// Count threshold passes over a batch. Uses the same inclusive comparisons
/// as [`decide`], so `p_unknown` is exactly the empirical frequency of the
/// `Unknown` variant on the batch.
pub fn estimate_abstention(batch: &[(f64, f64)], t_r: f64, t_m: f64) -> Result<AbstentionEstimate> {
    if batch.is_empty() {
        return Err(Error::Validation(
            "cannot estimate abstention over an empty batch".into(),
        ));
    }
    let mut retrieval_pass = 0usize;
    let mut model_pass = 0usize;
    let mut joint_pass = 0usize;
    for &(s_max, c_m) in batch {
        let r = s_max >= t_r;
        let m = c_m >= t_m;
        retrieval_pass += usize::from(r);
        model_pass += usize::from(m);
        joint_pass += usize::from(r && m);
    }
    let total = batch.len();
    let answered = retrieval_pass + model_pass - joint_pass;
    let unknown = total - answered;
    let frac = |n: usize| n as f64 / total as f64;
    Ok(AbstentionEstimate {
        total,
        retrieval_pass,
        model_pass,
        joint_pass,
        answered,
        unknown,
        p_retrieval_pass: frac(retrieval_pass),
        p_model_pass: frac(model_pass),
        p_joint_pass: frac(joint_pass),
        p_answer: frac(answered),
        p_unknown: frac(unknown),
    })
}

// ─── Abstention log ──────────────────────────────────────────────────────────

/// One abstained query, as appended to the abstention log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstentionEntry {
    pub timestamp_ms: u64,
    pub query: String,
    pub s_max: Option<f64>,
    pub c_m: f64,
    pub t_r: f64,
    pub t_m: f64,
}

/// Append-only sink for abstained queries. Implementations serialize writes.
pub trait AbstentionLog: Send + Sync {
    fn append(&self, entry: &AbstentionEntry) -> Result<()>;
}

/// JSONL file sink, opened in append mode.
pub struct FileAbstentionLog {
    path: PathBuf,
    file: Mutex<fs::File>,
}

impl FileAbstentionLog {
    pub fn open(path: &Path) -> Result<Self> {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(FileAbstentionLog {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }
}

impl AbstentionLog for FileAbstentionLog {
    fn append(&self, entry: &AbstentionEntry) -> Result<()> {
        let mut line = serde_json::to_string(entry).expect("entry serializes");
        line.push('\n');
        let mut file = self.file.lock().expect("log lock");
        file.write_all(line.as_bytes())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// In-memory sink for tests and ephemeral runs.
#[derive(Default)]
pub struct MemoryAbstentionLog {
    entries: Mutex<Vec<AbstentionEntry>>,
}

impl MemoryAbstentionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> Vec<AbstentionEntry> {
        self.entries.lock().expect("log lock").clone()
    }
}

impl AbstentionLog for MemoryAbstentionLog {
    fn append(&self, entry: &AbstentionEntry) -> Result<()> {
        self.entries.lock().expect("log lock").push(entry.clone());
        Ok(())
    }
}

/// Discards every entry.
pub struct NullAbstentionLog;

impl AbstentionLog for NullAbstentionLog {
    fn append(&self, _entry: &AbstentionEntry) -> Result<()> {
        Ok(())
    }
}

fn unix_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

// ─── Pipeline ────────────────────────────────────────────────────────────────

/// Everything the pipeline needs besides the corpus, index, and adapters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub weights: RelevanceWeights,
    pub thresholds: Thresholds,
    pub rating_policy: RatingPolicy,
    pub retrieval_n: usize,
    pub baseline_tokens: usize,
    pub sigma_max: f64,
    pub domain_offset: f64,
    pub timing: TimingMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            weights: RelevanceWeights::default(),
            thresholds: Thresholds::default(),
            rating_policy: RatingPolicy::default(),
            retrieval_n: 10,
            baseline_tokens: 8,
            sigma_max: 4.0,
            domain_offset: 0.0,
            timing: TimingMode::Measured,
        }
    }
}

/// The answer channel: generated text or the explicit abstention sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "text")]
pub enum Answer {
    Text(String),
    Unknown,
}

/// Literal sentinel printed on the answer channel for abstentions.
pub const UNKNOWN_SENTINEL: &str = "UNKNOWN";

impl Answer {
    /// Rendering for the answer channel.
    pub fn as_channel_text(&self) -> &str {
        match self {
            Answer::Text(t) => t,
            Answer::Unknown => UNKNOWN_SENTINEL,
        }
    }
}

/// Full result of one pipeline execution.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub answer: Answer,
    pub decision: Decision,
    /// All retrieved candidates, ranked by raw score.
    pub candidates: Vec<ScoredDocument>,
    pub latency: LatencyBreakdown,
    pub sigma: f64,
    pub query_embedding: EmbeddingVector,
}

/// The retrieval-side half of the pipeline: embed the query, retrieve
/// `retrieval_n` candidates, score them, rank by raw score, and fill in
/// normalized scores. Returns the query embedding and the ranked list.
pub fn score_candidates(
    query: &str,
    index: &VectorIndex,
    corpus: &Corpus,
    cfg: &PipelineConfig,
    embedder: &dyn Embedder,
) -> Result<(EmbeddingVector, Vec<ScoredDocument>)> {
    let query_embedding = embedder.embed(query).map_err(|e| e.at_stage("embed"))?;
    let candidates = retrieve_top_n(index, &query_embedding, cfg.retrieval_n)
        .map_err(|e| e.at_stage("retrieve"))?;
    let scored: Vec<ScoredDocument> = candidates
        .iter()
        .map(|c| {
            let doc = corpus.document(&c.doc_id).ok_or_else(|| {
                Error::Validation(format!("index entry `{}` missing from corpus", c.doc_id))
                    .at_stage("score")
            })?;
            let reliability = rate_source(corpus.source_for(doc), &cfg.rating_policy).value;
            Ok(ScoredDocument::new(
                c.doc_id.clone(),
                c.similarity,
                reliability,
                &cfg.weights,
            ))
        })
        .collect::<Result<_>>()?;
    let mut ranked = rank_candidates(scored);
    if !ranked.is_empty() {
        normalize_scores(&mut ranked, &cfg.weights).map_err(|e| e.at_stage("score"))?;
    }
    Ok((query_embedding, ranked))
}

/// Pick the documents handed to generation. Context is non-empty exactly
/// for the two retrieval-backed variants: the normalized-score filter
/// selects the documents, and when it disagrees with the raw ranking badly
/// enough to keep nothing (raw and normalized orders need not coincide),
/// the top-ranked candidate is used so a passing retrieval always yields
/// context.
pub fn select_context(
    ranked: &[ScoredDocument],
    variant: DecisionVariant,
    t_r: f64,
) -> Vec<ScoredDocument> {
    match variant {
        DecisionVariant::Combined | DecisionVariant::RetrievedOnly => {
            let kept = filter_by_threshold(ranked, t_r);
            if kept.is_empty() {
                vec![ranked[0].clone()]
            } else {
                kept
            }
        }
        DecisionVariant::IntrinsicOnly | DecisionVariant::Unknown => Vec::new(),
    }
}

/// Run the full pipeline for one query:
/// embed → retrieve → score → rank → adapt thresholds → decide → generate.
///
/// Empty retrieval is defined to fail the retrieval threshold (the maximum
/// of an empty score set has no value that could pass). `Unknown` outcomes
/// append the query to the abstention log before returning.
pub fn execute_pipeline(
    query: &str,
    index: &VectorIndex,
    corpus: &Corpus,
    cfg: &PipelineConfig,
    embedder: &dyn Embedder,
    adapter: &dyn ModelAdapter,
    abstention_log: &dyn AbstentionLog,
) -> Result<PipelineOutcome> {
    if query.trim().is_empty() {
        return Err(Error::Validation("query must be non-empty".into()));
    }
    let mut timer = StageTimer::start(cfg.timing);
    let (query_embedding, ranked) = score_candidates(query, index, corpus, cfg, embedder)?;
    timer.mark_retrieval_done();

    // Integration phase: thresholds, confidence, decision, generation.
    let sigma = query_complexity(query, cfg.baseline_tokens, cfg.sigma_max)?;
    let (t_r, t_m) = cfg.thresholds.effective(sigma, cfg.domain_offset);
    let s_max = ranked.first().map(|c| c.score);
    let c_m = adapter
        .model_confidence(query)
        .map_err(|e| e.at_stage("confidence"))?;
    let variant = decide(s_max.unwrap_or(f64::NEG_INFINITY), c_m, t_r, t_m);
    let context_doc_ids: Vec<String> = select_context(&ranked, variant, t_r)
        .iter()
        .map(|c| c.doc_id.clone())
        .collect();

    let answer = match variant {
        DecisionVariant::Unknown => {
            abstention_log
                .append(&AbstentionEntry {
                    timestamp_ms: unix_millis(),
                    query: query.to_string(),
                    s_max,
                    c_m: c_m.value(),
                    t_r,
                    t_m,
                })
                .map_err(|e| e.at_stage("abstention-log"))?;
            Answer::Unknown
        }
        _ => {
            let docs: Vec<&Document> = context_doc_ids
                .iter()
                .map(|id| corpus.document(id).expect("context ids come from corpus"))
                .collect();
            let text = adapter
                .generate_response(query, &docs, variant)
                .map_err(|e| e.at_stage("generate"))?;
            Answer::Text(text)
        }
    };

    let latency = timer.finish();
    Ok(PipelineOutcome {
        answer,
        decision: Decision {
            variant,
            s_max,
            c_m: c_m.value(),
            t_r,
            t_m,
            context_doc_ids,
        },
        candidates: ranked,
        latency,
        sigma: sigma.sigma,
        query_embedding,
    })
}
