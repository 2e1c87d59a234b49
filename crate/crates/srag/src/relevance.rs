//! Composite and normalized relevance scoring.
//!
//! Each candidate gets a raw score
//!
//! ```text
//! score = alpha * similarity + beta * reliability        (alpha + beta = 1)
//! ```
//!
//! and a normalized score
//!
//! ```text
//! normalized = z1 * alpha * similarity + z2 * beta * reliability
//! ```
//!
//! where `z1` and `z2` are the reciprocals of the per-candidate-set maxima
//! of similarity and reliability (falling back to 1 when a maximum is not
//! positive). That choice keeps normalized scores at most `alpha + beta = 1`
//! and makes the normalized ranking invariant under rescaling all
//! similarities by a positive constant.
//!
//! Ranking sorts by the raw score; inclusion filtering compares the
//! normalized score against a threshold. The two orders need not coincide:
//! normalization reweights the similarity and reliability axes per
//! candidate set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Blend weights between semantic similarity and source reliability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceWeights {
    alpha: f64,
    beta: f64,
}

impl RelevanceWeights {
    const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(Error::Validation(format!(
                "weights must lie in [0,1]: alpha={alpha}, beta={beta}"
            )));
        }
        if (alpha + beta - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Validation(format!(
                "alpha + beta must equal 1, got {}",
                alpha + beta
            )));
        }
        Ok(RelevanceWeights { alpha, beta })
    }

    /// Weights from the similarity weight alone, with `beta = 1 - alpha`.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        RelevanceWeights::new(alpha, 1.0 - alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for RelevanceWeights {
    /// Semantic match is the dominant signal by default.
    fn default() -> Self {
        RelevanceWeights {
            alpha: 0.7,
            beta: 0.3,
        }
    }
}

/// Reciprocal-of-maximum factors used to normalize one candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationFactors {
    pub z1: f64,
    pub z2: f64,
}

/// A retrieval candidate annotated with both scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub doc_id: String,
    pub similarity: f64,
    pub reliability: f64,
    /// Raw composite score; recomputable from the fields above.
    pub score: f64,
    /// Filled by [`normalize_scores`]; zero until then.
    pub normalized_score: f64,
}

impl ScoredDocument {
    pub fn new(
        doc_id: impl Into<String>,
        similarity: f64,
        reliability: f64,
        weights: &RelevanceWeights,
    ) -> Self {
        ScoredDocument {
            doc_id: doc_id.into(),
            similarity,
            reliability,
            score: composite_score(similarity, reliability, weights),
            normalized_score: 0.0,
        }
    }
}

/// Raw composite relevance: `alpha * similarity + beta * reliability`.
pub fn composite_score(similarity: f64, reliability: f64, weights: &RelevanceWeights) -> f64 {
    weights.alpha * similarity + weights.beta * reliability
}

/// Fill `normalized_score` on every candidate and return the factors used.
/// The factors reproduce each normalized score exactly:
/// `z1 * alpha * similarity + z2 * beta * reliability`.
pub fn normalize_scores(
    candidates: &mut [ScoredDocument],
    weights: &RelevanceWeights,
) -> Result<NormalizationFactors> {
    if candidates.is_empty() {
        return Err(Error::Validation(
            "cannot normalize an empty candidate list".into(),
        ));
    }
    let max_sim = candidates
        .iter()
        .map(|c| c.similarity)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_rel = candidates
        .iter()
        .map(|c| c.reliability)
        .fold(f64::NEG_INFINITY, f64::max);
    let z1 = if max_sim > 0.0 { 1.0 / max_sim } else { 1.0 };
    let z2 = if max_rel > 0.0 { 1.0 / max_rel } else { 1.0 };
    for c in candidates.iter_mut() {
        c.normalized_score = z1 * weights.alpha * c.similarity + z2 * weights.beta * c.reliability;
    }
    Ok(NormalizationFactors { z1, z2 })
}

/// Sort by raw score descending, ties by `doc_id` ascending. Idempotent.
pub fn rank_candidates(mut candidates: Vec<ScoredDocument>) -> Vec<ScoredDocument> {
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    candidates
}

/// Keep exactly the candidates with `normalized_score >= threshold`,
/// preserving order. The comparison is inclusive so a document sitting
/// exactly at the threshold stays in.
pub fn filter_by_threshold(candidates: &[ScoredDocument], threshold: f64) -> Vec<ScoredDocument> {
    candidates
        .iter()
        .filter(|c| c.normalized_score >= threshold)
        .cloned()
        .collect()
}
