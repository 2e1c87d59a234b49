//! Declarative run configuration.
//!
//! Every tunable lives in one TOML file so experiments are reproducible
//! from config alone: score weights, thresholds and their complexity
//! slopes, the rating policy, retrieval depth, embedder parameters, the
//! adapter, timing mode, and file paths. All fields have defaults; an
//! empty file is a valid config.
//!
//! ```toml
//! [weights]
//! alpha = 0.7
//! beta = 0.3
//!
//! [thresholds]
//! t_r_base = 0.5
//! t_m_base = 0.5
//! k_r = 0.1
//! k_m = 0.1
//! sigma_max = 4.0
//! domain_offset = 0.0
//! baseline_tokens = 8
//!
//! [retrieval]
//! n = 10
//!
//! [embedder]
//! dim = 128
//! seed = 42
//!
//! [adapter]
//! kind = "mock"            # or "remote" with `endpoint`
//! fixture_path = "mock.jsonl"
//!
//! [timing]
//! mode = "measured"        # or "logical" with `tick_micros`
//!
//! [paths]
//! corpus = "docs.jsonl"
//! sources = "sources.jsonl"
//! abstention_log = "abstention_log.jsonl"
//! ```
//!
//! A handful of environment variables override their config counterparts:
//! `SRAG_ENDPOINT`, `SRAG_CORPUS`, `SRAG_SOURCES`, `SRAG_INDEX`,
//! `SRAG_ABSTENTION_LOG`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterKind, AdapterSpec};
use crate::corpus::RatingPolicy;
use crate::error::{Error, Result};
use crate::integration::{PipelineConfig, Thresholds};
use crate::relevance::RelevanceWeights;
use crate::timing::TimingMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig {
            alpha: 0.7,
            beta: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsConfig {
    pub t_r_base: f64,
    pub t_m_base: f64,
    pub k_r: f64,
    pub k_m: f64,
    pub sigma_max: f64,
    pub domain_offset: f64,
    pub baseline_tokens: usize,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig {
            t_r_base: 0.5,
            t_m_base: 0.5,
            k_r: 0.1,
            k_m: 0.1,
            sigma_max: 4.0,
            domain_offset: 0.0,
            baseline_tokens: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub n: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { n: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig { dim: 512, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub sources: PathBuf,
    /// Optional prebuilt index snapshot; rebuilt from the corpus if unset.
    pub index: Option<PathBuf>,
    pub abstention_log: PathBuf,
    /// Optional JSONL sink for query embeddings.
    pub query_log: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: PathBuf::from("docs.jsonl"),
            sources: PathBuf::from("sources.jsonl"),
            index: None,
            abstention_log: PathBuf::from("abstention_log.jsonl"),
            query_log: None,
        }
    }
}

fn default_adapter() -> AdapterSpec {
    AdapterSpec {
        kind: AdapterKind::Mock,
        model_name: "mock".to_string(),
        endpoint: None,
        fixture_path: None,
        timeout_ms: 10_000,
        max_in_flight: 4,
    }
}

/// The whole run configuration. See the module docs for the file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weights: WeightsConfig,
    pub thresholds: ThresholdsConfig,
    pub rating: RatingPolicy,
    pub retrieval: RetrievalConfig,
    pub embedder: EmbedderConfig,
    pub adapter: AdapterSpec,
    pub timing: TimingMode,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            weights: WeightsConfig::default(),
            thresholds: ThresholdsConfig::default(),
            rating: RatingPolicy::default(),
            retrieval: RetrievalConfig::default(),
            embedder: EmbedderConfig::default(),
            adapter: default_adapter(),
            timing: TimingMode::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&raw).map_err(|e| Error::Config {
            field: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.apply_env_overrides(|name| std::env::var(name).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply environment overrides through an injectable lookup.
    pub fn apply_env_overrides(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get("SRAG_ENDPOINT") {
            self.adapter.endpoint = Some(v);
        }
        if let Some(v) = get("SRAG_CORPUS") {
            self.paths.corpus = PathBuf::from(v);
        }
        if let Some(v) = get("SRAG_SOURCES") {
            self.paths.sources = PathBuf::from(v);
        }
        if let Some(v) = get("SRAG_INDEX") {
            self.paths.index = Some(PathBuf::from(v));
        }
        if let Some(v) = get("SRAG_ABSTENTION_LOG") {
            self.paths.abstention_log = PathBuf::from(v);
        }
    }

    pub fn validate(&self) -> Result<()> {
        RelevanceWeights::new(self.weights.alpha, self.weights.beta).map_err(|e| {
            Error::Config {
                field: "weights".into(),
                message: e.to_string(),
            }
        })?;
        Thresholds::new(
            self.thresholds.t_r_base,
            self.thresholds.t_m_base,
            self.thresholds.k_r,
            self.thresholds.k_m,
        )?;
        self.rating.validate()?;
        if self.retrieval.n == 0 {
            return Err(Error::Config {
                field: "retrieval.n".into(),
                message: "must be >= 1".into(),
            });
        }
        if self.embedder.dim < 2 {
            return Err(Error::Config {
                field: "embedder.dim".into(),
                message: "must be >= 2".into(),
            });
        }
        if self.thresholds.sigma_max.is_nan() || self.thresholds.sigma_max <= 0.0 {
            return Err(Error::Config {
                field: "thresholds.sigma_max".into(),
                message: "must be > 0".into(),
            });
        }
        if self.thresholds.baseline_tokens == 0 {
            return Err(Error::Config {
                field: "thresholds.baseline_tokens".into(),
                message: "must be >= 1".into(),
            });
        }
        if !self.thresholds.domain_offset.is_finite() {
            return Err(Error::Config {
                field: "thresholds.domain_offset".into(),
                message: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Assemble the validated pipeline configuration.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        self.validate()?;
        Ok(PipelineConfig {
            weights: RelevanceWeights::new(self.weights.alpha, self.weights.beta)?,
            thresholds: Thresholds::new(
                self.thresholds.t_r_base,
                self.thresholds.t_m_base,
                self.thresholds.k_r,
                self.thresholds.k_m,
            )?,
            rating_policy: self.rating.clone(),
            retrieval_n: self.retrieval.n,
            baseline_tokens: self.thresholds.baseline_tokens,
            sigma_max: self.thresholds.sigma_max,
            domain_offset: self.thresholds.domain_offset,
            timing: self.timing,
        })
    }
}
