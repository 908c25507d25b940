//! Run configuration: one TOML file, every field optional, defaults below.
//! Command-line flags override file values; the API key only ever comes from
//! the environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus;
use crate::discernment::{DiscernParams, NgramFeaturizer, TrainParams, DEFAULT_HASH_BITS, DEFAULT_NGRAM_ORDERS};
use crate::gateway::{self, GatewayOptions, RetryPolicy};
use crate::metrics::Task;
use crate::pipeline::{PipelineConfig, StageModel};
use crate::retrieval::RAG_K_PRESETS;
use crate::stats;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_API_KEY_ENV: &str = "JUDGEBENCH_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub corpus: CorpusConfig,
    pub provider: ProviderConfig,
    pub pipeline: PipelineSection,
    pub retrieval: RetrievalConfig,
    pub stats: StatsConfig,
    pub ablation: AblationConfig,
    pub discern: DiscernConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("runs/default"),
            corpus: CorpusConfig::default(),
            provider: ProviderConfig::default(),
            pipeline: PipelineSection::default(),
            retrieval: RetrievalConfig::default(),
            stats: StatsConfig::default(),
            ablation: AblationConfig::default(),
            discern: DiscernConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: Option<PathBuf>,
    pub min_docs: usize,
    pub test_ratio: f64,
    pub prefix_fraction: f64,
    pub strip_niqqud: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            path: None,
            min_docs: corpus::DEFAULT_MIN_DOCS,
            test_ratio: corpus::DEFAULT_TEST_RATIO,
            prefix_fraction: corpus::DEFAULT_PREFIX_FRACTION,
            strip_niqqud: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// Scripted mock provider (JSON). Takes precedence over the HTTP endpoints.
    pub mock: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub chat_url: Option<String>,
    pub embed_url: Option<String>,
    pub pos_url: Option<String>,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub embed_model: String,
    pub pos_model: String,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        let g = GatewayOptions::default();
        Self {
            mock: None,
            cache_dir: None,
            chat_url: None,
            embed_url: None,
            pos_url: None,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 120,
            embed_model: g.embed_model,
            pos_model: g.pos_model,
            max_in_flight: g.max_in_flight,
            retry: g.retry,
        }
    }
}

impl ProviderConfig {
    pub fn is_configured(&self) -> bool {
        self.mock.is_some() || self.chat_url.is_some() || self.embed_url.is_some() || self.pos_url.is_some()
    }

    pub fn gateway_options(&self) -> GatewayOptions {
        GatewayOptions {
            embed_model: self.embed_model.clone(),
            pos_model: self.pos_model.clone(),
            retry: self.retry,
            max_in_flight: self.max_in_flight,
            cache_dir: self.cache_dir.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub extractor_model: String,
    pub extractor_temperature: f64,
    pub extractor_max_tokens: u32,
    pub validator_model: String,
    pub validator_temperature: f64,
    pub validator_max_tokens: u32,
    pub workers: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let (e, v) = (StageModel::extractor(), StageModel::validator());
        Self {
            extractor_model: e.model,
            extractor_temperature: e.temperature,
            extractor_max_tokens: e.max_tokens,
            validator_model: v.model,
            validator_temperature: v.temperature,
            validator_max_tokens: v.max_tokens,
            workers: gateway::DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl PipelineSection {
    pub fn to_pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            extractor: StageModel {
                model: self.extractor_model.clone(),
                temperature: self.extractor_temperature,
                max_tokens: self.extractor_max_tokens,
            },
            validator: StageModel {
                model: self.validator_model.clone(),
                temperature: self.validator_temperature,
                max_tokens: self.validator_max_tokens,
            },
            workers: self.workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k_values: Vec<usize>,
    /// Custom prompt template with `{examples}` and `{question}` placeholders.
    pub template: Option<PathBuf>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_values: RAG_K_PRESETS.to_vec(),
            template: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub alpha: f64,
    pub resamples: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            alpha: stats::DEFAULT_ALPHA,
            resamples: stats::DEFAULT_RESAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub fractions: Vec<f64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            fractions: corpus::ABLATION_FRACTIONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturizerKind {
    Ngram,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscernConfig {
    pub test_ratio: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub featurizer: FeaturizerKind,
    pub ngram_orders: Vec<usize>,
    pub hash_bits: u32,
    /// Only used by the embedding featurizer.
    pub embedding_dimension: usize,
}

impl Default for DiscernConfig {
    fn default() -> Self {
        let p = DiscernParams::default();
        Self {
            test_ratio: p.test_ratio,
            epochs: p.train.epochs,
            learning_rate: p.train.learning_rate,
            l2: p.train.l2,
            featurizer: FeaturizerKind::Ngram,
            ngram_orders: DEFAULT_NGRAM_ORDERS.to_vec(),
            hash_bits: DEFAULT_HASH_BITS,
            embedding_dimension: 256,
        }
    }
}

impl DiscernConfig {
    pub fn params(&self, seed: u64) -> DiscernParams {
        DiscernParams {
            test_ratio: self.test_ratio,
            seed,
            train: TrainParams {
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                l2: self.l2,
            },
        }
    }

    pub fn ngram_featurizer(&self) -> NgramFeaturizer {
        NgramFeaturizer {
            orders: self.ngram_orders.clone(),
            hash_bits: self.hash_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Method every other method is compared against in the pivot table.
    pub pivot: Option<String>,
    pub task: Task,
    /// Method name to row group heading.
    pub groups: BTreeMap<String, String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            pivot: None,
            task: Task::Qa,
            groups: BTreeMap::new(),
        }
    }
}

fn open_unit(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field,
            message: format!("{v} is not in (0, 1)"),
        })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        open_unit("corpus.test_ratio", self.corpus.test_ratio)?;
        open_unit("corpus.prefix_fraction", self.corpus.prefix_fraction)?;
        open_unit("stats.alpha", self.stats.alpha)?;
        open_unit("discern.test_ratio", self.discern.test_ratio)?;
        if self.stats.resamples == 0 {
            return Err(ConfigError::Invalid {
                field: "stats.resamples",
                message: "must be positive".into(),
            });
        }
        if let Some(f) = self.ablation.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(ConfigError::Invalid {
                field: "ablation.fractions",
                message: format!("{f} is not in (0, 1]"),
            });
        }
        if self.retrieval.k_values.contains(&0) {
            return Err(ConfigError::Invalid {
                field: "retrieval.k_values",
                message: "k must be positive".into(),
            });
        }
        if !(1..=30).contains(&self.discern.hash_bits) {
            return Err(ConfigError::Invalid {
                field: "discern.hash_bits",
                message: format!("{} is not in 1..=30", self.discern.hash_bits),
            });
        }
        Ok(())
    }
}
