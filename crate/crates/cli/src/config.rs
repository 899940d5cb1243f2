//! Run configuration: one JSON file drives every subcommand. `config init`
//! writes the full defaults; `--seed` on the command line overrides every
//! seed in the file at once.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use lexsum_core::hashing::fnv1a64;
use lexsum_core::policy::HeadKind;
use lexsum_core::rl::PpoConfig;
use lexsum_core::stopwords::parse_stopwords;
use lexsum_core::{EmbeddingProvider, OovPolicy, RewardConfig, TrainConfig};

fn default_oov() -> OovPolicy {
    OovPolicy::HashFallback
}

/// Embedding provider selection, serialized with a `kind` tag.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSpec {
    Hash {
        dim: usize,
        seed: u64,
    },
    FileVectors {
        path: PathBuf,
        #[serde(default = "default_oov")]
        oov_policy: OovPolicy,
    },
}

impl EmbeddingSpec {
    pub fn build(&self) -> Result<EmbeddingProvider> {
        match self {
            EmbeddingSpec::Hash { dim, seed } => Ok(EmbeddingProvider::hash(*dim, *seed)),
            EmbeddingSpec::FileVectors { path, oov_policy } => {
                lexsum_core::embeddings::load_vectors_with_policy(path, *oov_policy)
                    .with_context(|| format!("loading vectors from {}", path.display()))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub train_corpus: Option<PathBuf>,
    pub valid_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    /// Provider for sentence states (and, unless overridden below, for both
    /// reward terms).
    pub embedding: EmbeddingSpec,
    /// Optional distinct provider for the keyword reward.
    pub keyword_embedding: Option<EmbeddingSpec>,
    /// Optional distinct provider for the sequence reward.
    pub seq_embedding: Option<EmbeddingSpec>,
    pub head: HeadKind,
    /// MLP hidden width (ignored by the linear head).
    pub hidden: usize,
    /// Sentences selected at inference.
    pub m: usize,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    pub ppo: PpoConfig,
    /// Optional stopword list file (one token per line); defaults to the
    /// embedded English list.
    pub stopword_file: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train_corpus: None,
            valid_corpus: None,
            test_corpus: None,
            embedding: EmbeddingSpec::Hash { dim: 32, seed: 0 },
            keyword_embedding: None,
            seq_embedding: None,
            head: HeadKind::Linear,
            hidden: 32,
            m: 3,
            reward: RewardConfig::default(),
            train: TrainConfig::default(),
            ppo: PpoConfig::default(),
            stopword_file: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// One `--seed` flag re-seeds the whole pipeline.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.ppo.seed = seed;
    }

    /// Reward config with the stopword file (if any) applied.
    pub fn reward_config(&self) -> Result<RewardConfig> {
        let mut reward = self.reward.clone();
        if let Some(path) = &self.stopword_file {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading stopword list {}", path.display()))?;
            reward.keyword.stopwords = parse_stopwords(&text);
        }
        Ok(reward)
    }

    /// Stable hash of the serialized config, reported in eval output.
    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.to_json().as_bytes()))
    }
}
