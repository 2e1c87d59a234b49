//! Unit-normalized embedding vectors and cosine similarity.
//!
//! Vectors are normalized once at construction so similarity inside the
//! retrieval loop is a plain dot product. The built-in
//! [`HashedTrigramEmbedder`] is a deterministic, dependency-free stand-in
//! for a learned model: it hashes character trigrams into `dim` signed
//! buckets, which preserves enough lexical locality for ranking tests.
//! Real embedding backends can be plugged in through the [`Embedder`]
//! trait.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-norm invariant of constructed vectors.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// A fixed-dimension, unit-normalized semantic vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalize raw values into a unit vector.
    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("embedding must have dim >= 1".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Validation(format!(
                "cannot normalize vector with norm {norm}"
            )));
        }
        Ok(EmbeddingVector {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Accept values that are already unit-normalized, preserving their bits.
    /// Used when loading index snapshots, where re-normalizing could perturb
    /// stored query results.
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("embedding must have dim >= 1".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::Validation(format!(
                "vector norm {norm} deviates from 1 beyond {UNIT_NORM_TOLERANCE}"
            )));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cosine similarity of two unit vectors: their dot product, clamped to
/// `[-1, 1]` against rounding. Exactly symmetric in its arguments.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Validation(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x * y)
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Anything that turns text into a fixed-dimension unit vector.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Deterministic mock embedder: seeded FNV-hashed character trigrams
/// projected onto `dim` signed buckets, then normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedTrigramEmbedder {
    dim: usize,
    seed: u64,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl HashedTrigramEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Validation(format!("embedder dim {dim} < 2")));
        }
        Ok(HashedTrigramEmbedder { dim, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Embedder for HashedTrigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        embed_text(text, self.dim, self.seed)
    }
}

/// Embed `text` into `dim` buckets; a pure function of `(text, dim, seed)`.
///
/// Padding with a leading and trailing space guarantees at least one
/// trigram for any non-empty text. Each trigram adds ±1 to one bucket; the
/// sign bit of the hash decorrelates buckets so shared trigrams dominate
/// the dot product.
pub fn embed_text(text: &str, dim: usize, seed: u64) -> Result<EmbeddingVector> {
    if text.is_empty() {
        return Err(Error::Validation("cannot embed empty text".into()));
    }
    if dim < 2 {
        return Err(Error::Validation(format!("embedding dim {dim} < 2")));
    }
    let padded: Vec<char> = std::iter::once(' ')
        .chain(text.chars())
        .chain(std::iter::once(' '))
        .collect();
    let mut buckets = vec![0.0f64; dim];
    let mut buf = [0u8; 12];
    for w in padded.windows(3) {
        let mut len = 0;
        for c in w {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let h = fnv1a(seed, &buf[..len]);
        let idx = (h % dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
        buckets[idx] += sign;
    }
    // Full cancellation is possible for tiny texts; fall back to a single
    // deterministic bucket keyed by the whole text.
    if buckets.iter().all(|&v| v == 0.0) {
        let h = fnv1a(seed ^ 0x5eed, text.as_bytes());
        buckets[(h % dim as u64) as usize] = 1.0;
    }
    EmbeddingVector::from_raw(buckets)
}
