//! Exact vector index over a corpus and top-n retrieval.
//!
//! Retrieval is a deliberate full scan: no approximate structures, so the
//! decision layer's inputs stay reproducible. Candidates are ordered by
//! similarity descending with ties broken by `doc_id` ascending, which
//! makes every result a total order and therefore testable against a
//! brute-force oracle.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{cosine_similarity, Embedder, EmbeddingVector};
use crate::error::{Error, Result};

/// Immutable map from `doc_id` to its embedding. Entries are kept sorted by
/// `doc_id` so builds are order-independent and snapshots deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    entries: Vec<(String, EmbeddingVector)>,
}

/// One retrieval candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub similarity: f64,
}

impl VectorIndex {
    /// Embed every document of `corpus`. An empty corpus yields an empty
    /// index with the embedder's dimension.
    pub fn build(corpus: &Corpus, embedder: &dyn Embedder) -> Result<Self> {
        let mut entries = Vec::with_capacity(corpus.len());
        for doc in corpus.documents() {
            entries.push((doc.doc_id.clone(), embedder.embed(&doc.text)?));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(VectorIndex {
            dim: embedder.dim(),
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, EmbeddingVector)] {
        &self.entries
    }

    /// Check that index entries cover exactly the documents of `corpus`.
    pub fn validate_cover(&self, corpus: &Corpus) -> Result<()> {
        if self.len() != corpus.len() {
            return Err(Error::Validation(format!(
                "index has {} entries but corpus has {} documents",
                self.len(),
                corpus.len()
            )));
        }
        for (doc_id, _) in &self.entries {
            if corpus.document(doc_id).is_none() {
                return Err(Error::Validation(format!(
                    "index entry `{doc_id}` not present in corpus"
                )));
            }
        }
        Ok(())
    }
}

/// Return the top `n` candidates for `query_vec`, sorted by similarity
/// descending, ties by `doc_id` ascending. Equal to a brute-force scan by
/// construction; fewer than `n` results when the index is smaller.
pub fn retrieve_top_n(
    index: &VectorIndex,
    query_vec: &EmbeddingVector,
    n: usize,
) -> Result<Vec<Candidate>> {
    if n == 0 {
        return Err(Error::Validation("retrieval n must be >= 1".into()));
    }
    if !index.is_empty() && query_vec.dim() != index.dim() {
        return Err(Error::Validation(format!(
            "query dim {} does not match index dim {}",
            query_vec.dim(),
            index.dim()
        )));
    }
    let mut candidates: Vec<Candidate> = index
        .entries
        .iter()
        .map(|(doc_id, vec)| {
            Ok(Candidate {
                doc_id: doc_id.clone(),
                similarity: cosine_similarity(query_vec, vec)?,
            })
        })
        .collect::<Result<_>>()?;
    candidates.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    candidates.truncate(n);
    Ok(candidates)
}

// ─── Snapshot format ─────────────────────────────────────────────────────────
//
// Line 1 is a header, each following line one (doc_id, values) pair. Vector
// values survive the JSON round trip bit-exactly, so a loaded snapshot
// reproduces query results byte for byte.

const SNAPSHOT_FORMAT: &str = "srag-index";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    format: String,
    version: u32,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct SnapshotEntry {
    doc_id: String,
    values: Vec<f64>,
}

impl VectorIndex {
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let header = SnapshotHeader {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            dim: self.dim,
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for (doc_id, vec) in &self.entries {
            let entry = SnapshotEntry {
                doc_id: doc_id.clone(),
                values: vec.values().to_vec(),
            };
            out.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
            out.push('\n');
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = raw
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header_line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty snapshot"))?;
        let header: SnapshotHeader =
            serde_json::from_str(header_line).map_err(|e| Error::parse(path, 1, e.to_string()))?;
        if header.format != SNAPSHOT_FORMAT {
            return Err(Error::parse(
                path,
                1,
                format!("unknown snapshot format `{}`", header.format),
            ));
        }
        if header.version != SNAPSHOT_VERSION {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported snapshot version {}", header.version),
            ));
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            let entry: SnapshotEntry =
                serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            if entry.values.len() != header.dim {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!(
                        "entry `{}` has dim {} but header says {}",
                        entry.doc_id,
                        entry.values.len(),
                        header.dim
                    ),
                ));
            }
            entries.push((entry.doc_id, EmbeddingVector::from_unit(entry.values)?));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(VectorIndex {
            dim: header.dim,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, SyntheticSpec};
    use crate::embedding::{embed_text, HashedTrigramEmbedder};

    fn small_corpus(n_golden: usize, n_noisy: usize, seed: u64) -> Corpus {
        generate_synthetic_corpus(&SyntheticSpec {
            n_golden,
            n_noisy,
            n_topics: 4,
            seed,
        })
        .unwrap()
        .0
    }

    /// Independent oracle: repeated max-extraction over a plain similarity
    /// scan, sharing no code with `retrieve_top_n`'s sort path.
    fn oracle_top_n(index: &VectorIndex, query: &EmbeddingVector, n: usize) -> Vec<(String, f64)> {
        let mut pool: Vec<(String, f64)> = index
            .entries()
            .iter()
            .map(|(id, v)| {
                let dot: f64 = query
                    .values()
                    .iter()
                    .zip(v.values().iter())
                    .map(|(a, b)| a * b)
                    .sum();
                (id.clone(), dot.clamp(-1.0, 1.0))
            })
            .collect();
        let mut out = Vec::new();
        while out.len() < n && !pool.is_empty() {
            let mut best = 0;
            for i in 1..pool.len() {
                let better = pool[i].1 > pool[best].1
                    || (pool[i].1 == pool[best].1 && pool[i].0 < pool[best].0);
                if better {
                    best = i;
                }
            }
            out.push(pool.swap_remove(best));
        }
        out
    }

    #[test]
    fn empty_corpus_builds_empty_index() {
        let embedder = HashedTrigramEmbedder::new(8, 1).unwrap();
        let index = VectorIndex::build(&Corpus::empty(), &embedder).unwrap();
        assert_eq!(index.len(), 0);
        let q = embed_text("anything", 8, 1).unwrap();
        assert!(retrieve_top_n(&index, &q, 5).unwrap().is_empty());
    }

    #[test]
    fn index_covers_corpus() {
        let corpus = small_corpus(50, 50, 2);
        let embedder = HashedTrigramEmbedder::new(32, 1).unwrap();
        let index = VectorIndex::build(&corpus, &embedder).unwrap();
        assert_eq!(index.len(), 100);
        index.validate_cover(&corpus).unwrap();
    }

    #[test]
    fn rebuild_is_identical() {
        let corpus = small_corpus(10, 10, 3);
        let embedder = HashedTrigramEmbedder::new(16, 5).unwrap();
        let a = VectorIndex::build(&corpus, &embedder).unwrap();
        let b = VectorIndex::build(&corpus, &embedder).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn n_larger_than_index_returns_all_sorted() {
        let corpus = small_corpus(3, 0, 4);
        let embedder = HashedTrigramEmbedder::new(16, 1).unwrap();
        let index = VectorIndex::build(&corpus, &embedder).unwrap();
        let q = embed_text("survey records", 16, 1).unwrap();
        let got = retrieve_top_n(&index, &q, 5).unwrap();
        assert_eq!(got.len(), 3);
        for w in got.windows(2) {
            assert!(w[0].similarity >= w[1].similarity);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let corpus = small_corpus(2, 0, 4);
        let embedder = HashedTrigramEmbedder::new(16, 1).unwrap();
        let index = VectorIndex::build(&corpus, &embedder).unwrap();
        let q = embed_text("x", 8, 1).unwrap();
        assert!(retrieve_top_n(&index, &q, 1).is_err());
    }

    #[test]
    fn zero_n_rejected() {
        let embedder = HashedTrigramEmbedder::new(8, 1).unwrap();
        let index = VectorIndex::build(&Corpus::empty(), &embedder).unwrap();
        let q = embed_text("x", 8, 1).unwrap();
        assert!(retrieve_top_n(&index, &q, 0).is_err());
    }

    #[test]
    fn matches_brute_force_oracle() {
        let corpus = small_corpus(100, 100, 6);
        let embedder = HashedTrigramEmbedder::new(32, 9).unwrap();
        let index = VectorIndex::build(&corpus, &embedder).unwrap();
        for qi in 0..20 {
            let q = embed_text(&format!("probe text number {qi} melt rate"), 32, 9).unwrap();
            let got = retrieve_top_n(&index, &q, 10).unwrap();
            let want = oracle_top_n(&index, &q, 10);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(want.iter()) {
                assert_eq!(g.doc_id, w.0, "query {qi}");
                assert_eq!(g.similarity, w.1, "query {qi}");
            }
        }
    }

    #[test]
    fn prefix_stability() {
        let corpus = small_corpus(30, 30, 8);
        let embedder = HashedTrigramEmbedder::new(32, 2).unwrap();
        let index = VectorIndex::build(&corpus, &embedder).unwrap();
        let q = embed_text("the ignition threshold of the arctic foundry", 32, 2).unwrap();
        let full = retrieve_top_n(&index, &q, 20).unwrap();
        for k in 1..=20 {
            let prefix = retrieve_top_n(&index, &q, k).unwrap();
            assert_eq!(prefix.as_slice(), &full[..k.min(full.len())]);
        }
    }

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let corpus = small_corpus(20, 20, 11);
        let embedder = HashedTrigramEmbedder::new(24, 4).unwrap();
        let index = VectorIndex::build(&corpus, &embedder).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.jsonl");
        index.save_snapshot(&path).unwrap();
        let loaded = VectorIndex::load_snapshot(&path).unwrap();
        assert_eq!(index, loaded);

        let q = embed_text("registry for the gilded atoll", 24, 4).unwrap();
        let a = retrieve_top_n(&index, &q, 7).unwrap();
        let b = retrieve_top_n(&loaded, &q, 7).unwrap();
        assert_eq!(a, b);
        for ((_, va), (_, vb)) in index.entries().iter().zip(loaded.entries().iter()) {
            for (x, y) in va.values().iter().zip(vb.values().iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn snapshot_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, "{\"format\":\"other\",\"version\":1,\"dim\":4}\n").unwrap();
        assert!(VectorIndex::load_snapshot(&path).is_err());
    }
}
