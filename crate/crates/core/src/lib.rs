//! Extractive summarization with a supervised sentence-selection backbone and
//! reinforcement-learning fine-tuning.
//!
//! The pipeline: documents are tokenized and scored sentence-by-sentence by a
//! sigmoid selector head over pluggable embeddings ([`policy`]); the selector
//! is pretrained with cross-entropy against greedy ROUGE oracle labels
//! ([`corpus`]) and then fine-tuned with PPO or REINFORCE ([`rl`]) under a
//! combined reward ([`reward`]): averaged ROUGE F1 ([`metrics`]), keyword
//! coverage via max-min diversified keyword sets ([`keywords`]), and an
//! inverse word-mover-distance sequence reward, with per-step KL shaping
//! against the frozen supervised policy.

pub mod corpus;
pub mod embeddings;
pub mod hashing;
pub mod keywords;
pub mod metrics;
pub mod policy;
pub mod reward;
pub mod rl;
pub mod stopwords;

pub use corpus::{Document, LabelVector, Sentence, Summary, SyntheticSpec, TokenSeq};
pub use embeddings::{EmbeddingProvider, OovPolicy, Vector};
pub use keywords::{KeywordConfig, KeywordEntry, KeywordSet};
pub use metrics::{PrecisionRecallF1, RougeConfig};
pub use policy::{Head, HeadKind, PolicyParams, StateVector, TrainConfig};
pub use reward::{RewardBreakdown, RewardConfig, RewardProviders};
pub use rl::{Algorithm, PpoConfig, Trajectory};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus line {line}: {message}")]
    CorpusLine { line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("document {doc}: sentence {index} is empty after tokenization")]
    EmptySentence { doc: String, index: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("vector file line {line}: {message}")]
    VectorParse { line: usize, message: String },
    #[error("vector for token {token:?} has dimension {found}, expected {expected}")]
    VectorDim {
        token: String,
        expected: usize,
        found: usize,
    },
    #[error("no vectors in file")]
    NoVectors,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("no keyword candidates")]
    NoKeywordCandidates,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("encoder fingerprint mismatch: checkpoint has {checkpoint:?}, provider is {provider:?}")]
    FingerprintMismatch { checkpoint: String, provider: String },
    #[error("unknown document id {0:?}")]
    UnknownDocId(String),
}

pub type Result<T> = std::result::Result<T, Error>;
