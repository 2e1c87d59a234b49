//! Document corpus: storage, source reliability ratings, JSONL ingestion,
//! and synthetic corpus generation with planted ground truth.
//!
//! A [`Corpus`] is immutable after construction and safe for concurrent
//! reads. Every document references a [`SourceRecord`] carrying an A–F
//! credibility rating; [`rate_source`] maps that rating to a numeric
//! reliability in `[0, 1]`.
//!
//! The JSONL interchange format is one document record per line:
//!
//! ```text
//! {"doc_id":"d1","text":"...","source_id":"s1","provenance_label":"rag","quality_label":"golden"}
//! ```
//!
//! Source records live in a sidecar JSONL file (`{"source_id":"s1","rating":"A"}`)
//! or inline on document records via an optional `rating` field.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ─── Domain types ────────────────────────────────────────────────────────────

/// Ordinal source credibility rating. `A` is highly reliable, `E` is
/// unreliable, and `F` is reserved for sources that cannot be judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceRating {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl SourceRating {
    pub const ALL: [SourceRating; 6] = [
        SourceRating::A,
        SourceRating::B,
        SourceRating::C,
        SourceRating::D,
        SourceRating::E,
        SourceRating::F,
    ];
}

impl fmt::Display for SourceRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SourceRating::A => "A",
            SourceRating::B => "B",
            SourceRating::C => "C",
            SourceRating::D => "D",
            SourceRating::E => "E",
            SourceRating::F => "F",
        };
        f.write_str(s)
    }
}

/// Ground-truth origin of a document, used only by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceLabel {
    Rag,
    Training,
    Neither,
}

/// Whether a document was planted as high-quality or deliberately corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLabel {
    Golden,
    Noisy,
    Unknown,
}

/// One retrievable text unit plus its provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance_label: Option<ProvenanceLabel>,
    #[serde(default = "default_quality")]
    pub quality_label: QualityLabel,
}

fn default_quality() -> QualityLabel {
    QualityLabel::Unknown
}

/// Reliability metadata for one document origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub source_id: String,
    pub rating: SourceRating,
    /// Observed fraction of past outputs that proved accurate, in `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub historical_performance: Option<f64>,
}

impl SourceRecord {
    pub fn new(source_id: impl Into<String>, rating: SourceRating) -> Self {
        SourceRecord {
            source_id: source_id.into(),
            rating,
            historical_performance: None,
        }
    }
}

/// An immutable, validated collection of documents and their sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    sources: Vec<SourceRecord>,
    doc_ids: HashMap<String, usize>,
    source_ids: HashMap<String, usize>,
}

impl Corpus {
    /// Validate and freeze a corpus. Enforces unique ids, non-empty text,
    /// resolvable source references, and in-range historical performance.
    pub fn new(documents: Vec<Document>, sources: Vec<SourceRecord>) -> Result<Self> {
        let mut source_ids = HashMap::with_capacity(sources.len());
        for (i, s) in sources.iter().enumerate() {
            if let Some(h) = s.historical_performance {
                if !(0.0..=1.0).contains(&h) {
                    return Err(Error::Validation(format!(
                        "source `{}`: historical_performance {h} outside [0,1]",
                        s.source_id
                    )));
                }
            }
            if source_ids.insert(s.source_id.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate source_id `{}`",
                    s.source_id
                )));
            }
        }
        let mut doc_ids = HashMap::with_capacity(documents.len());
        for (i, d) in documents.iter().enumerate() {
            if d.text.is_empty() {
                return Err(Error::Validation(format!(
                    "document `{}` has empty text",
                    d.doc_id
                )));
            }
            if !source_ids.contains_key(&d.source_id) {
                return Err(Error::Validation(format!(
                    "document `{}` references unknown source `{}`",
                    d.doc_id, d.source_id
                )));
            }
            if doc_ids.insert(d.doc_id.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate doc_id `{}`",
                    d.doc_id
                )));
            }
        }
        Ok(Corpus {
            documents,
            sources,
            doc_ids,
            source_ids,
        })
    }

    pub fn empty() -> Self {
        Corpus::new(Vec::new(), Vec::new()).expect("empty corpus is valid")
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn sources(&self) -> &[SourceRecord] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_ids.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn source(&self, source_id: &str) -> Option<&SourceRecord> {
        self.source_ids.get(source_id).map(|&i| &self.sources[i])
    }

    /// The source record backing a document. Always resolves for documents
    /// of this corpus (checked at construction).
    pub fn source_for(&self, doc: &Document) -> &SourceRecord {
        self.source(&doc.source_id)
            .expect("corpus invariant: source_id resolves")
    }
}

// ─── Source reliability ──────────────────────────────────────────────────────

/// How letter ratings map to numeric reliability.
///
/// The default is the linear embedding A=1.0, B=0.75, C=0.5, D=0.25, E=0.0.
/// `F` ("judgment cannot be made") maps to `unjudged_default` and is flagged
/// as unjudged rather than excluded. When a source carries historical
/// performance data, the letter value and the historical value are mixed
/// with weight `historical_blend` on the historical side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatingPolicy {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub unjudged_default: f64,
    pub historical_blend: f64,
}

impl Default for RatingPolicy {
    fn default() -> Self {
        RatingPolicy {
            a: 1.0,
            b: 0.75,
            c: 0.5,
            d: 0.25,
            e: 0.0,
            unjudged_default: 0.5,
            historical_blend: 0.5,
        }
    }
}

impl RatingPolicy {
    pub fn letter_value(&self, rating: SourceRating) -> f64 {
        match rating {
            SourceRating::A => self.a,
            SourceRating::B => self.b,
            SourceRating::C => self.c,
            SourceRating::D => self.d,
            SourceRating::E => self.e,
            SourceRating::F => self.unjudged_default,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
            ("unjudged_default", self.unjudged_default),
            ("historical_blend", self.historical_blend),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config {
                    field: format!("rating.{name}"),
                    message: format!("value {v} outside [0,1]"),
                });
            }
        }
        Ok(())
    }
}

/// Numeric reliability of a source plus whether a judgment was possible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reliability {
    pub value: f64,
    pub judged: bool,
}

/// Map a source record to its reliability score `R(d)` in `[0, 1]`.
///
/// `F`-rated sources return the policy's unjudged default with
/// `judged = false`; historical performance is ignored for them because no
/// judgment is being made. For judged sources with historical data the
/// result blends letter value and history per the policy weight.
pub fn rate_source(record: &SourceRecord, policy: &RatingPolicy) -> Reliability {
    if record.rating == SourceRating::F {
        return Reliability {
            value: policy.unjudged_default,
            judged: false,
        };
    }
    let letter = policy.letter_value(record.rating);
    let value = match record.historical_performance {
        Some(h) => (1.0 - policy.historical_blend) * letter + policy.historical_blend * h,
        None => letter,
    };
    Reliability {
        value,
        judged: true,
    }
}

// ─── JSONL ingestion ─────────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
struct DocRecord {
    doc_id: String,
    text: String,
    source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rating: Option<SourceRating>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance_label: Option<ProvenanceLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quality_label: Option<QualityLabel>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.to_string()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect())
}

/// Ingest a JSONL corpus file, with source records drawn from an optional
/// sidecar file and/or inline `rating` fields on document records.
///
/// Errors name the offending line: a malformed line is a parse error, a
/// duplicate `doc_id` is a validation error citing the second occurrence,
/// and a document whose source has no rating anywhere is a validation
/// error.
pub fn ingest_documents(docs_path: &Path, sources_path: Option<&Path>) -> Result<Corpus> {
    let mut sources: Vec<SourceRecord> = Vec::new();
    let mut source_index: HashMap<String, usize> = HashMap::new();

    if let Some(sp) = sources_path {
        for (line_no, line) in read_lines(sp)? {
            let rec: SourceRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse(sp, line_no, e.to_string()))?;
            if source_index.contains_key(&rec.source_id) {
                return Err(Error::Validation(format!(
                    "{}:{line_no}: duplicate source_id `{}`",
                    sp.display(),
                    rec.source_id
                )));
            }
            source_index.insert(rec.source_id.clone(), sources.len());
            sources.push(rec);
        }
    }

    let mut documents: Vec<Document> = Vec::new();
    let mut seen_docs: HashMap<String, usize> = HashMap::new();
    for (line_no, line) in read_lines(docs_path)? {
        let rec: DocRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(docs_path, line_no, e.to_string()))?;
        if let Some(prev) = seen_docs.get(&rec.doc_id) {
            return Err(Error::Validation(format!(
                "{}:{line_no}: duplicate doc_id `{}` (first seen on line {prev})",
                docs_path.display(),
                rec.doc_id
            )));
        }
        if rec.text.is_empty() {
            return Err(Error::Validation(format!(
                "{}:{line_no}: document `{}` has empty text",
                docs_path.display(),
                rec.doc_id
            )));
        }
        match (rec.rating, source_index.get(&rec.source_id)) {
            (Some(r), Some(&i)) => {
                if sources[i].rating != r {
                    return Err(Error::Validation(format!(
                        "{}:{line_no}: inline rating {r} for source `{}` conflicts with sidecar rating {}",
                        docs_path.display(),
                        rec.source_id,
                        sources[i].rating
                    )));
                }
            }
            (Some(r), None) => {
                source_index.insert(rec.source_id.clone(), sources.len());
                sources.push(SourceRecord::new(rec.source_id.clone(), r));
            }
            (None, Some(_)) => {}
            (None, None) => {
                return Err(Error::Validation(format!(
                    "{}:{line_no}: document `{}` references source `{}` with no rating in sidecar or inline",
                    docs_path.display(),
                    rec.doc_id,
                    rec.source_id
                )));
            }
        }
        seen_docs.insert(rec.doc_id.clone(), line_no);
        documents.push(Document {
            doc_id: rec.doc_id,
            text: rec.text,
            source_id: rec.source_id,
            provenance_label: rec.provenance_label,
            quality_label: rec.quality_label.unwrap_or(QualityLabel::Unknown),
        });
    }

    Corpus::new(documents, sources)
}

/// Write a corpus back to JSONL (documents plus sidecar sources).
/// Re-ingesting the written files yields an equal corpus.
pub fn write_corpus(corpus: &Corpus, docs_path: &Path, sources_path: &Path) -> Result<()> {
    let mut docs_out = String::new();
    for d in corpus.documents() {
        let rec = DocRecord {
            doc_id: d.doc_id.clone(),
            text: d.text.clone(),
            source_id: d.source_id.clone(),
            rating: None,
            provenance_label: d.provenance_label,
            quality_label: Some(d.quality_label),
        };
        docs_out.push_str(&serde_json::to_string(&rec).expect("document serializes"));
        docs_out.push('\n');
    }
    let mut sources_out = String::new();
    for s in corpus.sources() {
        sources_out.push_str(&serde_json::to_string(s).expect("source serializes"));
        sources_out.push('\n');
    }
    let mut f = fs::File::create(docs_path).map_err(|e| Error::io(docs_path, e))?;
    f.write_all(docs_out.as_bytes())
        .map_err(|e| Error::io(docs_path, e))?;
    let mut f = fs::File::create(sources_path).map_err(|e| Error::io(sources_path, e))?;
    f.write_all(sources_out.as_bytes())
        .map_err(|e| Error::io(sources_path, e))?;
    Ok(())
}

// ─── Synthetic corpus generation ─────────────────────────────────────────────

/// Parameters for [`generate_synthetic_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_golden: usize,
    pub n_noisy: usize,
    pub n_topics: usize,
    pub seed: u64,
}

/// Ground truth for one generated topic: the canonical question, the planted
/// answer, and the golden documents that state it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicKey {
    pub topic: String,
    pub query: String,
    pub answer: String,
    pub golden_doc_ids: Vec<String>,
}

/// Maps every generated topic to its golden documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub seed: u64,
    pub topics: Vec<TopicKey>,
}

const ADJECTIVES: [&str; 16] = [
    "crimson",
    "gilded",
    "hollow",
    "verdant",
    "obsidian",
    "amber",
    "silent",
    "arctic",
    "molten",
    "prismatic",
    "cobalt",
    "ivory",
    "umbral",
    "saffron",
    "lunar",
    "ferric",
];

const NOUNS: [&str; 16] = [
    "reactor",
    "archive",
    "glacier",
    "orchard",
    "turbine",
    "lighthouse",
    "aqueduct",
    "observatory",
    "foundry",
    "atoll",
    "basilica",
    "viaduct",
    "citadel",
    "monolith",
    "estuary",
    "causeway",
];

const PROPERTIES: [&str; 16] = [
    "ignition threshold",
    "catalog span",
    "melt rate",
    "harvest yield",
    "torque rating",
    "beam reach",
    "flow capacity",
    "mirror diameter",
    "casting volume",
    "reef extent",
    "vault height",
    "span length",
    "garrison size",
    "resonance period",
    "tide range",
    "pier count",
];

const UNITS: [&str; 8] = [
    "kelvin",
    "meters",
    "liters per hour",
    "newton meters",
    "hectares",
    "kilopascals",
    "cubic meters",
    "megawatts",
];

// Noise vocabulary is disjoint from the topic vocabulary so corrupted and
// off-topic documents never collide with a planted topic.
const NOISE_WORDS: [&str; 24] = [
    "zephyr",
    "quibble",
    "brindle",
    "soporific",
    "galoshes",
    "truncheon",
    "mizzen",
    "farrago",
    "palimpsest",
    "skerrick",
    "dirigible",
    "operetta",
    "bivouac",
    "rucksack",
    "tambourine",
    "gunwale",
    "marzipan",
    "ocarina",
    "pemmican",
    "spelunking",
    "tarpaulin",
    "vestibule",
    "wainscot",
    "yardarm",
];

struct Topic {
    name: String,
    adjective: &'static str,
    noun: &'static str,
    property: &'static str,
    value: String,
}

fn make_topics(n_topics: usize, rng: &mut ChaCha8Rng) -> Vec<Topic> {
    let mut pairs: Vec<(usize, usize)> = (0..ADJECTIVES.len())
        .flat_map(|a| (0..NOUNS.len()).map(move |n| (a, n)))
        .collect();
    pairs.shuffle(rng);
    let mut props: Vec<usize> = (0..PROPERTIES.len()).collect();
    props.shuffle(rng);
    (0..n_topics)
        .map(|i| {
            let (a, n) = pairs[i % pairs.len()];
            let adjective = ADJECTIVES[a];
            let noun = NOUNS[n];
            let property = PROPERTIES[props[i % props.len()]];
            let value = format!(
                "{} {}",
                rng.gen_range(3..950),
                UNITS[rng.gen_range(0..UNITS.len())]
            );
            Topic {
                name: format!("{adjective}-{noun}"),
                adjective,
                noun,
                property,
                value,
            }
        })
        .collect()
}

fn golden_text(topic: &Topic, rng: &mut ChaCha8Rng) -> String {
    let Topic {
        adjective: adj,
        noun,
        property: prop,
        value,
        ..
    } = topic;
    match rng.gen_range(0..3u8) {
        0 => format!(
            "Survey records put the {adj} {noun} {prop} at {value}; \
             follow-up inspections confirmed that figure."
        ),
        1 => format!(
            "The {adj} {noun} {prop} equals {value} according to the \
             maintenance ledger kept on site."
        ),
        _ => format!(
            "Archivists cataloguing the registry measured the {adj} {noun} \
             {prop} as {value}."
        ),
    }
}

fn noisy_text(rng: &mut ChaCha8Rng) -> String {
    // Two corruption styles: word salad, and salad with character scrambles.
    let n_words = rng.gen_range(10..18);
    let mut words: Vec<String> = (0..n_words)
        .map(|_| NOISE_WORDS[rng.gen_range(0..NOISE_WORDS.len())].to_string())
        .collect();
    if rng.gen_bool(0.5) {
        for w in words.iter_mut() {
            if rng.gen_bool(0.3) {
                let mut chars: Vec<char> = w.chars().collect();
                chars.shuffle(rng);
                *w = chars.into_iter().collect();
            }
        }
    }
    let mut s = words.join(" ");
    s.push('.');
    s
}

/// Generate a mixed-quality corpus with planted ground truth.
///
/// Golden documents state a topic's fact verbatim and come from A/B-rated
/// sources; noisy documents are corrupted or off-topic and come from
/// D/E-rated sources. Golden documents are assigned to topics round-robin.
/// The whole construction is a pure function of the spec, seed included.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<(Corpus, AnswerKey)> {
    if spec.n_topics == 0 && spec.n_golden + spec.n_noisy > 0 {
        return Err(Error::Validation(
            "n_topics must be >= 1 when documents are requested".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let golden_sources = [
        SourceRecord::new("src-golden-a", SourceRating::A),
        SourceRecord::new("src-golden-b", SourceRating::B),
    ];
    let noisy_sources = [
        SourceRecord::new("src-noisy-d", SourceRating::D),
        SourceRecord::new("src-noisy-e", SourceRating::E),
    ];

    let topics = make_topics(spec.n_topics, &mut rng);
    let mut golden_by_topic: BTreeMap<usize, Vec<String>> = BTreeMap::new();

    let mut documents = Vec::with_capacity(spec.n_golden + spec.n_noisy);
    for i in 0..spec.n_golden {
        let t = i % topics.len();
        let doc_id = format!("g-{i:04}");
        documents.push(Document {
            doc_id: doc_id.clone(),
            text: golden_text(&topics[t], &mut rng),
            source_id: golden_sources[i % 2].source_id.clone(),
            provenance_label: Some(ProvenanceLabel::Rag),
            quality_label: QualityLabel::Golden,
        });
        golden_by_topic.entry(t).or_default().push(doc_id);
    }
    for i in 0..spec.n_noisy {
        documents.push(Document {
            doc_id: format!("n-{i:04}"),
            text: noisy_text(&mut rng),
            source_id: noisy_sources[i % 2].source_id.clone(),
            provenance_label: Some(ProvenanceLabel::Neither),
            quality_label: QualityLabel::Noisy,
        });
    }

    let mut sources = Vec::new();
    if spec.n_golden > 0 {
        sources.extend(golden_sources.iter().cloned());
    }
    if spec.n_noisy > 0 {
        sources.extend(noisy_sources.iter().cloned());
    }

    let key = AnswerKey {
        seed: spec.seed,
        topics: topics
            .iter()
            .enumerate()
            .map(|(t, topic)| TopicKey {
                topic: topic.name.clone(),
                query: format!(
                    "What is the {} {} {}?",
                    topic.adjective, topic.noun, topic.property
                ),
                answer: topic.value.clone(),
                golden_doc_ids: golden_by_topic.get(&t).cloned().unwrap_or_default(),
            })
            .collect(),
    };

    Ok((Corpus::new(documents, sources)?, key))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn ingest_counts_lines() {
        let docs = write_temp(&[
            r#"{"doc_id":"d1","text":"alpha","source_id":"s1","rating":"A"}"#,
            r#"{"doc_id":"d2","text":"beta","source_id":"s1"}"#,
            r#"{"doc_id":"d3","text":"gamma","source_id":"s1"}"#,
        ]);
        let corpus = ingest_documents(docs.path(), None).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.sources().len(), 1);
    }

    #[test]
    fn ingest_duplicate_doc_id_cites_line() {
        let docs = write_temp(&[
            r#"{"doc_id":"d0","text":"x","source_id":"s1","rating":"A"}"#,
            r#"{"doc_id":"d1","text":"x","source_id":"s1"}"#,
            r#"{"doc_id":"d2","text":"x","source_id":"s1"}"#,
            r#"{"doc_id":"d3","text":"x","source_id":"s1"}"#,
            r#"{"doc_id":"d1","text":"x","source_id":"s1"}"#,
        ]);
        let err = ingest_documents(docs.path(), None).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)), "{msg}");
        assert!(msg.contains(":5:"), "should cite line 5: {msg}");
        assert!(msg.contains("d1"), "{msg}");
    }

    #[test]
    fn ingest_missing_text_names_line() {
        let docs = write_temp(&[
            r#"{"doc_id":"d1","text":"x","source_id":"s1","rating":"A"}"#,
            r#"{"doc_id":"d2","text":"x","source_id":"s1"}"#,
            r#"{"doc_id":"d3","text":"x","source_id":"s1"}"#,
            r#"{"doc_id":"d4","source_id":"s1"}"#,
        ]);
        let err = ingest_documents(docs.path(), None).unwrap_err();
        match &err {
            Error::Parse { line, .. } => assert_eq!(*line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ingest_missing_file_is_io_error() {
        let err = ingest_documents(Path::new("/nonexistent/docs.jsonl"), None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn ingest_unrated_source_rejected() {
        let docs = write_temp(&[r#"{"doc_id":"d1","text":"x","source_id":"mystery"}"#]);
        let err = ingest_documents(docs.path(), None).unwrap_err();
        assert!(err.to_string().contains("mystery"));
    }

    #[test]
    fn ingest_sidecar_sources() {
        let docs = write_temp(&[r#"{"doc_id":"d1","text":"x","source_id":"s9"}"#]);
        let sources =
            write_temp(&[r#"{"source_id":"s9","rating":"C","historical_performance":0.8}"#]);
        let corpus = ingest_documents(docs.path(), Some(sources.path())).unwrap();
        let s = corpus.source("s9").unwrap();
        assert_eq!(s.rating, SourceRating::C);
        assert_eq!(s.historical_performance, Some(0.8));
    }

    #[test]
    fn rate_source_letter_map_enumerated() {
        // Oracle: the documented linear map, enumerated over all five letters.
        let policy = RatingPolicy::default();
        let expected = [
            (SourceRating::A, 1.0),
            (SourceRating::B, 0.75),
            (SourceRating::C, 0.5),
            (SourceRating::D, 0.25),
            (SourceRating::E, 0.0),
        ];
        for (rating, want) in expected {
            let r = rate_source(&SourceRecord::new("s", rating), &policy);
            assert_eq!(r.value, want, "{rating}");
            assert!(r.judged);
        }
    }

    #[test]
    fn rate_source_f_is_unjudged_default() {
        let policy = RatingPolicy::default();
        let r = rate_source(&SourceRecord::new("s", SourceRating::F), &policy);
        assert_eq!(r.value, 0.5);
        assert!(!r.judged);
        // F ignores historical data: no judgment is being made.
        let mut rec = SourceRecord::new("s", SourceRating::F);
        rec.historical_performance = Some(1.0);
        assert_eq!(rate_source(&rec, &policy).value, 0.5);
    }

    #[test]
    fn rate_source_monotone_over_letters() {
        let policy = RatingPolicy::default();
        let values: Vec<f64> = [
            SourceRating::A,
            SourceRating::B,
            SourceRating::C,
            SourceRating::D,
            SourceRating::E,
        ]
        .iter()
        .map(|&r| rate_source(&SourceRecord::new("s", r), &policy).value)
        .collect();
        for w in values.windows(2) {
            assert!(w[0] >= w[1], "letter map must be monotone: {values:?}");
        }
    }

    #[test]
    fn rate_source_blends_historical() {
        let policy = RatingPolicy::default();
        let mut rec = SourceRecord::new("s", SourceRating::A);
        rec.historical_performance = Some(0.5);
        let r = rate_source(&rec, &policy);
        assert!((r.value - 0.75).abs() < 1e-12); // 0.5*1.0 + 0.5*0.5
    }

    #[test]
    fn synthetic_empty_spec() {
        let (corpus, key) = generate_synthetic_corpus(&SyntheticSpec {
            n_golden: 0,
            n_noisy: 0,
            n_topics: 1,
            seed: 7,
        })
        .unwrap();
        assert!(corpus.is_empty());
        assert!(key.topics[0].golden_doc_ids.is_empty());
    }

    #[test]
    fn synthetic_zero_topics_with_docs_rejected() {
        let err = generate_synthetic_corpus(&SyntheticSpec {
            n_golden: 1,
            n_noisy: 0,
            n_topics: 0,
            seed: 1,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            n_golden: 10,
            n_noisy: 10,
            n_topics: 5,
            seed: 42,
        };
        let (c1, k1) = generate_synthetic_corpus(&spec).unwrap();
        let (c2, k2) = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(k1, k2);
        // Byte-identical when serialized.
        let dir = tempfile::tempdir().unwrap();
        let (d1, s1) = (dir.path().join("d1.jsonl"), dir.path().join("s1.jsonl"));
        let (d2, s2) = (dir.path().join("d2.jsonl"), dir.path().join("s2.jsonl"));
        write_corpus(&c1, &d1, &s1).unwrap();
        write_corpus(&c2, &d2, &s2).unwrap();
        assert_eq!(fs::read(&d1).unwrap(), fs::read(&d2).unwrap());
        assert_eq!(fs::read(&s1).unwrap(), fs::read(&s2).unwrap());
    }

    #[test]
    fn synthetic_source_ratings_partition() {
        // Oracle: exhaustive scan of the generated corpus.
        let (corpus, _) = generate_synthetic_corpus(&SyntheticSpec {
            n_golden: 10,
            n_noisy: 10,
            n_topics: 5,
            seed: 42,
        })
        .unwrap();
        for d in corpus.documents() {
            let rating = corpus.source_for(d).rating;
            match d.quality_label {
                QualityLabel::Golden => {
                    assert!(matches!(rating, SourceRating::A | SourceRating::B))
                }
                QualityLabel::Noisy => {
                    assert!(matches!(rating, SourceRating::D | SourceRating::E))
                }
                QualityLabel::Unknown => panic!("synthetic docs are labeled"),
            }
        }
    }

    #[test]
    fn synthetic_answer_key_covers_topics() {
        let (corpus, key) = generate_synthetic_corpus(&SyntheticSpec {
            n_golden: 12,
            n_noisy: 3,
            n_topics: 5,
            seed: 3,
        })
        .unwrap();
        assert_eq!(key.topics.len(), 5);
        let total_golden: usize = key.topics.iter().map(|t| t.golden_doc_ids.len()).sum();
        assert_eq!(total_golden, 12);
        for t in &key.topics {
            for id in &t.golden_doc_ids {
                let doc = corpus.document(id).unwrap();
                assert_eq!(doc.quality_label, QualityLabel::Golden);
                assert!(doc.text.contains(&t.answer), "golden doc states the fact");
            }
        }
    }

    #[test]
    fn roundtrip_write_then_ingest() {
        for seed in 0..5 {
            let (corpus, _) = generate_synthetic_corpus(&SyntheticSpec {
                n_golden: 8,
                n_noisy: 8,
                n_topics: 3,
                seed,
            })
            .unwrap();
            let dir = tempfile::tempdir().unwrap();
            let docs = dir.path().join("docs.jsonl");
            let sources = dir.path().join("sources.jsonl");
            write_corpus(&corpus, &docs, &sources).unwrap();
            let back = ingest_documents(&docs, Some(&sources)).unwrap();
            assert_eq!(corpus, back, "seed {seed}");
        }
    }
}
