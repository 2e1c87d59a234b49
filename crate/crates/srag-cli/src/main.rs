//! `srag` — corpus tooling, single-query runs, evaluation, and threshold
//! sweeps over the retrieval-augmented answering pipeline.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use srag::{
    cases_from_answer_key, estimate_abstention, generate_synthetic_corpus, ingest_documents,
    load_cases, run_eval, score_candidates, write_corpus, Corpus, Document, EmbeddingVector,
    FileAbstentionLog, HashedTrigramEmbedder, PipelineEnv, PipelineOutcome, RunConfig,
    SourceRecord, SyntheticSpec, VectorIndex,
};

#[derive(Parser)]
#[command(
    name = "srag",
    version,
    about = "Relevance-scored retrieval-augmented answering"
)]
struct Cli {
    /// Path to a TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic mixed-quality corpus with planted ground truth.
    GenCorpus {
        #[arg(long, default_value_t = 20)]
        golden: usize,
        #[arg(long, default_value_t = 20)]
        noisy: usize,
        #[arg(long, default_value_t = 5)]
        topics: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory for docs.jsonl, sources.jsonl, answer_key.json,
        /// and cases.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a JSONL corpus and optionally write a normalized copy.
    Ingest {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        sources: Option<PathBuf>,
        /// Write documents (sorted by doc_id) here after validation.
        #[arg(long)]
        out_docs: Option<PathBuf>,
        /// Write sources (sorted by source_id) here after validation.
        #[arg(long)]
        out_sources: Option<PathBuf>,
    },
    /// Build a vector index over a corpus and save a snapshot.
    Index {
        #[arg(long)]
        docs: Option<PathBuf>,
        #[arg(long)]
        sources: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the pipeline once and print the answer with provenance.
    Query {
        query: String,
        #[arg(long)]
        docs: Option<PathBuf>,
        #[arg(long)]
        sources: Option<PathBuf>,
        /// Load this index snapshot instead of rebuilding.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Emit the full outcome as JSON instead of human-readable text.
        #[arg(long)]
        json: bool,
    },
    /// Run an evaluation batch and write a report.
    Eval {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        docs: Option<PathBuf>,
        #[arg(long)]
        sources: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Also print the bundled reference scoreboard.
        #[arg(long)]
        show_reference: bool,
    },
    /// Grid-sweep base thresholds over a query batch and emit abstention
    /// curves.
    Sweep {
        /// JSONL file whose lines carry at least a `query` field.
        #[arg(long)]
        cases: PathBuf,
        /// Grid resolution per axis; thresholds are evenly spaced over [0,1].
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        docs: Option<PathBuf>,
        #[arg(long)]
        sources: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?
        }
        None => {
            let mut cfg = RunConfig::default();
            cfg.apply_env_overrides(|name| std::env::var(name).ok());
            cfg
        }
    };

    match cli.command {
        Command::GenCorpus {
            golden,
            noisy,
            topics,
            seed,
            out,
        } => gen_corpus(golden, noisy, topics, seed, &out),
        Command::Ingest {
            docs,
            sources,
            out_docs,
            out_sources,
        } => ingest(&docs, sources.as_deref(), out_docs, out_sources),
        Command::Index { docs, sources, out } => {
            let corpus = load_corpus(&config, docs, sources)?;
            let embedder = embedder_from(&config)?;
            let index = VectorIndex::build(&corpus, &embedder)?;
            index.save_snapshot(&out)?;
            println!(
                "indexed {} documents at dim {} -> {}",
                index.len(),
                index.dim(),
                out.display()
            );
            Ok(())
        }
        Command::Query {
            query,
            docs,
            sources,
            index,
            json,
        } => run_query(&config, &query, docs, sources, index, json),
        Command::Eval {
            cases,
            out,
            docs,
            sources,
            index,
            show_reference,
        } => run_eval_cmd(&config, &cases, &out, docs, sources, index, show_reference),
        Command::Sweep {
            cases,
            steps,
            out,
            docs,
            sources,
            index,
        } => run_sweep(&config, &cases, steps, &out, docs, sources, index),
    }
}

fn gen_corpus(golden: usize, noisy: usize, topics: usize, seed: u64, out: &Path) -> Result<()> {
    let (corpus, key) = generate_synthetic_corpus(&SyntheticSpec {
        n_golden: golden,
        n_noisy: noisy,
        n_topics: topics,
        seed,
    })?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_corpus(&corpus, &out.join("docs.jsonl"), &out.join("sources.jsonl"))?;

    let mut key_json = serde_json::to_string_pretty(&key)?;
    key_json.push('\n');
    fs::write(out.join("answer_key.json"), key_json)?;

    let cases = cases_from_answer_key(&key);
    let mut cases_out = String::new();
    for case in &cases {
        cases_out.push_str(&serde_json::to_string(case)?);
        cases_out.push('\n');
    }
    fs::write(out.join("cases.jsonl"), cases_out)?;

    println!(
        "wrote {} documents ({golden} golden, {noisy} noisy), {} sources, {} topics, {} cases -> {}",
        corpus.len(),
        corpus.sources().len(),
        key.topics.len(),
        cases.len(),
        out.display()
    );
    Ok(())
}

fn ingest(
    docs: &Path,
    sources: Option<&Path>,
    out_docs: Option<PathBuf>,
    out_sources: Option<PathBuf>,
) -> Result<()> {
    let corpus = ingest_documents(docs, sources)?;
    println!(
        "ok: {} documents, {} sources",
        corpus.len(),
        corpus.sources().len()
    );
    if out_docs.is_some() || out_sources.is_some() {
        let mut documents: Vec<Document> = corpus.documents().to_vec();
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let mut source_records: Vec<SourceRecord> = corpus.sources().to_vec();
        source_records.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        let normalized = Corpus::new(documents, source_records)?;
        let out_docs = out_docs.unwrap_or_else(|| docs.to_path_buf());
        let out_sources = out_sources.unwrap_or_else(|| out_docs.with_file_name("sources.jsonl"));
        write_corpus(&normalized, &out_docs, &out_sources)?;
        println!(
            "normalized -> {} and {}",
            out_docs.display(),
            out_sources.display()
        );
    }
    Ok(())
}

fn load_corpus(
    config: &RunConfig,
    docs: Option<PathBuf>,
    sources: Option<PathBuf>,
) -> Result<Corpus> {
    let docs = docs.unwrap_or_else(|| config.paths.corpus.clone());
    let sources = sources.unwrap_or_else(|| config.paths.sources.clone());
    let sources_arg = sources.exists().then_some(sources.as_path());
    Ok(ingest_documents(&docs, sources_arg)?)
}

fn embedder_from(config: &RunConfig) -> Result<HashedTrigramEmbedder> {
    Ok(HashedTrigramEmbedder::new(
        config.embedder.dim,
        config.embedder.seed,
    )?)
}

fn load_or_build_index(
    config: &RunConfig,
    corpus: &Corpus,
    embedder: &HashedTrigramEmbedder,
    index_flag: Option<PathBuf>,
) -> Result<VectorIndex> {
    let snapshot = index_flag.or_else(|| config.paths.index.clone());
    match snapshot {
        Some(path) => {
            let index = VectorIndex::load_snapshot(&path)
                .with_context(|| format!("loading index snapshot {}", path.display()))?;
            index.validate_cover(corpus)?;
            Ok(index)
        }
        None => Ok(VectorIndex::build(corpus, embedder)?),
    }
}

struct Session {
    corpus: Corpus,
    index: VectorIndex,
    embedder: HashedTrigramEmbedder,
    pipeline_cfg: srag::PipelineConfig,
    adapter: Box<dyn srag::ModelAdapter>,
    abstention_log: FileAbstentionLog,
    query_log: Option<PathBuf>,
}

impl Session {
    fn open(
        config: &RunConfig,
        docs: Option<PathBuf>,
        sources: Option<PathBuf>,
        index_flag: Option<PathBuf>,
    ) -> Result<Self> {
        let corpus = load_corpus(config, docs, sources)?;
        let embedder = embedder_from(config)?;
        let index = load_or_build_index(config, &corpus, &embedder, index_flag)?;
        let pipeline_cfg = config.pipeline_config()?;
        let adapter = config.adapter.build()?;
        let abstention_log = FileAbstentionLog::open(&config.paths.abstention_log)?;
        Ok(Session {
            corpus,
            index,
            embedder,
            pipeline_cfg,
            adapter,
            abstention_log,
            query_log: config.paths.query_log.clone(),
        })
    }

    fn env(&self) -> PipelineEnv<'_> {
        PipelineEnv {
            index: &self.index,
            corpus: &self.corpus,
            cfg: &self.pipeline_cfg,
            embedder: &self.embedder,
            adapter: self.adapter.as_ref(),
            abstention_log: &self.abstention_log,
        }
    }

    fn log_query_embedding(&self, query: &str, embedding: &EmbeddingVector) -> Result<()> {
        if let Some(path) = &self.query_log {
            let line = serde_json::to_string(&json!({
                "query": query,
                "values": embedding.values(),
            }))?;
            let mut file = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?;
            writeln!(file, "{line}")?;
        }
        Ok(())
    }
}

fn run_query(
    config: &RunConfig,
    query: &str,
    docs: Option<PathBuf>,
    sources: Option<PathBuf>,
    index: Option<PathBuf>,
    json_output: bool,
) -> Result<()> {
    let session = Session::open(config, docs, sources, index)?;
    let outcome = session.env().run(query)?;
    session.log_query_embedding(query, &outcome.query_embedding)?;
    if json_output {
        println!("{}", outcome_json(query, &outcome)?);
    } else {
        print_outcome(&outcome);
    }
    Ok(())
}

fn outcome_json(query: &str, outcome: &PipelineOutcome) -> Result<String> {
    Ok(serde_json::to_string_pretty(&json!({
        "query": query,
        "answer": outcome.answer.as_channel_text(),
        "abstained": outcome.answer == srag::Answer::Unknown,
        "decision": outcome.decision,
        "sigma": outcome.sigma,
        "candidates": outcome.candidates,
        "latency": outcome.latency,
    }))?)
}

fn print_outcome(outcome: &PipelineOutcome) {
    println!("{}", outcome.answer.as_channel_text());
    let d = &outcome.decision;
    println!("variant: {}", variant_name(d.variant));
    match d.s_max {
        Some(s) => println!(
            "s_max: {s:.4}  c_m: {:.4}  t_r: {:.4}  t_m: {:.4}  sigma: {:.3}",
            d.c_m, d.t_r, d.t_m, outcome.sigma
        ),
        None => println!(
            "s_max: (no candidates)  c_m: {:.4}  t_r: {:.4}  t_m: {:.4}  sigma: {:.3}",
            d.c_m, d.t_r, d.t_m, outcome.sigma
        ),
    }
    if !d.context_doc_ids.is_empty() {
        println!("context: {}", d.context_doc_ids.join(", "));
    }
    println!(
        "latency: l_r={}us l_i={}us total={}us",
        outcome.latency.l_r_micros, outcome.latency.l_i_micros, outcome.latency.l_total_micros
    );
}

fn variant_name(v: srag::DecisionVariant) -> &'static str {
    match v {
        srag::DecisionVariant::IntrinsicOnly => "intrinsic_only",
        srag::DecisionVariant::Combined => "combined",
        srag::DecisionVariant::RetrievedOnly => "retrieved_only",
        srag::DecisionVariant::Unknown => "unknown",
    }
}

fn run_eval_cmd(
    config: &RunConfig,
    cases_path: &Path,
    out: &Path,
    docs: Option<PathBuf>,
    sources: Option<PathBuf>,
    index: Option<PathBuf>,
    show_reference: bool,
) -> Result<()> {
    let cases = load_cases(cases_path)?;
    if cases.is_empty() {
        bail!("{}: no cases", cases_path.display());
    }
    let session = Session::open(config, docs, sources, index)?;
    let report = run_eval(&session.env(), &cases)?;
    report.write_to(out)?;

    println!("cases: {}", report.n_cases);
    print_rate("rag_dataset_score", report.metrics.rag_dataset_score);
    print_rate(
        "training_dataset_score",
        report.metrics.training_dataset_score,
    );
    print_rate("hallucination_score", report.metrics.hallucination_score);
    print_rate("abstention_rate", Some(report.metrics.abstention_rate));
    println!("mean_latency: {} us", report.mean_latency_micros);
    println!("report written to {}", out.display());

    if show_reference {
        println!("\nreference models (bundled, display only):");
        for r in srag::evaluation::reference_scores() {
            println!(
                "  {:<18} rag={:.2} training={:.2} hallucinations={:.2} latency={:.2}s",
                r.model, r.rag_dataset, r.training_dataset, r.hallucinations, r.latency_s
            );
        }
    }
    Ok(())
}

fn print_rate(name: &str, rate: Option<srag::Rate>) {
    match rate {
        Some(r) => println!("{name}: {:.4} ({}/{})", r.value, r.hits, r.total),
        None => println!("{name}: n/a"),
    }
}

fn run_sweep(
    config: &RunConfig,
    cases_path: &Path,
    steps: usize,
    out: &Path,
    docs: Option<PathBuf>,
    sources: Option<PathBuf>,
    index: Option<PathBuf>,
) -> Result<()> {
    if steps < 2 {
        bail!("sweep needs at least 2 steps per axis");
    }
    let queries = load_queries(cases_path)?;
    if queries.is_empty() {
        bail!("{}: no queries", cases_path.display());
    }
    let session = Session::open(config, docs, sources, index)?;

    // One observation per query; thresholds only enter during counting.
    let mut observations = Vec::with_capacity(queries.len());
    for query in &queries {
        let (_, ranked) = score_candidates(
            query,
            &session.index,
            &session.corpus,
            &session.pipeline_cfg,
            &session.embedder,
        )?;
        let s_max = ranked.first().map_or(f64::NEG_INFINITY, |c| c.score);
        let c_m = session.adapter.model_confidence(query)?;
        observations.push((s_max, c_m.value()));
    }

    let grid: Vec<f64> = (0..steps).map(|i| i as f64 / (steps - 1) as f64).collect();
    let mut rows = String::new();
    for &t_r in &grid {
        for &t_m in &grid {
            let est = estimate_abstention(&observations, t_r, t_m)?;
            let mut row = serde_json::to_value(est)?;
            row["t_r"] = json!(t_r);
            row["t_m"] = json!(t_m);
            rows.push_str(&serde_json::to_string(&row)?);
            rows.push('\n');
        }
    }
    fs::write(out, rows)?;
    println!(
        "swept {}x{} grid over {} observations -> {}",
        steps,
        steps,
        observations.len(),
        out.display()
    );
    Ok(())
}

fn load_queries(path: &Path) -> Result<Vec<String>> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut queries = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: malformed JSON", path.display(), i + 1))?;
        let query = value["query"]
            .as_str()
            .with_context(|| format!("{}:{}: expected a `query` field", path.display(), i + 1))?;
        queries.push(query.to_string());
    }
    Ok(queries)
}
