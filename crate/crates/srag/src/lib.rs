//! Relevance-scored retrieval-augmented answering with selective
//! abstention.
//!
//! The pipeline retrieves candidate documents for a query, scores each one
//! by blending semantic similarity with source credibility, and then picks
//! one of four response modes by comparing the best score and the model's
//! intrinsic confidence against adaptive thresholds: answer from the model
//! alone, answer from retrieved context, combine both, or abstain with an
//! explicit `Unknown`.
//!
//! Module map:
//!
//! - [`corpus`] — documents, source ratings, JSONL ingestion, synthetic
//!   corpora with planted ground truth
//! - [`embedding`] — unit-normalized vectors, cosine similarity, the
//!   deterministic mock embedder
//! - [`retrieval`] — exact vector index, top-n retrieval, snapshots
//! - [`relevance`] — composite and normalized scoring, ranking, threshold
//!   filtering
//! - [`integration`] — adaptive thresholds, the four-way decision rule,
//!   abstention estimation and logging, the end-to-end pipeline
//! - [`adapters`] — mock and remote language-model backends
//! - [`evaluation`] — batch runs, attribution/hallucination/abstention
//!   metrics, latency decomposition
//! - [`config`] — the TOML run configuration

pub mod adapters;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod integration;
pub mod relevance;
pub mod retrieval;
pub mod timing;

pub use adapters::{AdapterKind, AdapterSpec, MockAdapter, ModelAdapter, RemoteAdapter};
pub use config::RunConfig;
pub use corpus::{
    generate_synthetic_corpus, ingest_documents, rate_source, write_corpus, AnswerKey, Corpus,
    Document, QualityLabel, RatingPolicy, SourceRating, SourceRecord, SyntheticSpec,
};
pub use embedding::{
    cosine_similarity, embed_text, Embedder, EmbeddingVector, HashedTrigramEmbedder,
};
pub use error::{Error, Result};
pub use evaluation::{
    cases_from_answer_key, compute_metrics, load_cases, run_eval, EvalCase, EvalReport, EvalRow,
    Metrics, PipelineEnv, Rate, TruthLabel,
};
pub use integration::{
    adjust_threshold, decide, estimate_abstention, execute_pipeline, query_complexity,
    score_candidates, select_context, AbstentionEntry, AbstentionEstimate, AbstentionLog, Answer,
    Decision, DecisionVariant, FileAbstentionLog, MemoryAbstentionLog, ModelConfidence,
    NullAbstentionLog, PipelineConfig, PipelineOutcome, QueryComplexity, Thresholds,
    UNKNOWN_SENTINEL,
};
pub use relevance::{
    composite_score, filter_by_threshold, normalize_scores, rank_candidates, NormalizationFactors,
    RelevanceWeights, ScoredDocument,
};
pub use retrieval::{retrieve_top_n, Candidate, VectorIndex};
pub use timing::{measure_latency, LatencyBreakdown, StageTimer, TimingMode};
