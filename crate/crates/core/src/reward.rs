//! The combined episode reward and its KL-shaped per-step distribution: a
//! weighted sum of the averaged ROUGE F1, keyword coverage, and inverse
//! word-mover-distance terms is paid at the final step, while every step
//! carries `-beta_kl * log(p_RL(y)/p_SL(y))` to keep the fine-tuned policy
//! near the supervised one.

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Summary};
use crate::embeddings::EmbeddingProvider;
use crate::keywords::{get_keywords, r_kw, KeywordConfig, KeywordSet};
use crate::metrics::{r_rouge, r_seq, RougeConfig};
use crate::policy::clamp_prob;
use crate::rl::Trajectory;
use crate::{Error, Result};

/// Every constant of the reward scheme in one place. The enable flags carry
/// the ablation variants; disabled terms contribute zero without
/// renormalizing the alphas.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub beta_kl: f64,
    /// Keyword-set size shared by document and summary sides; overrides
    /// `keyword.n_k` when rewards are computed.
    pub n_k: usize,
    /// Additive constant in the sequence-reward denominator.
    pub epsilon: f64,
    pub rouge: RougeConfig,
    pub keyword: KeywordConfig,
    pub use_rouge: bool,
    pub use_kw: bool,
    pub use_seq: bool,
    pub use_kl: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.3,
            alpha2: 0.4,
            alpha3: 0.3,
            beta_kl: 0.05,
            n_k: 3,
            epsilon: 0.01,
            rouge: RougeConfig::default(),
            keyword: KeywordConfig::default(),
            use_rouge: true,
            use_kw: true,
            use_seq: true,
            use_kl: true,
        }
    }
}

impl RewardConfig {
    /// Keyword config with the reward-level `n_k` applied.
    pub fn keyword_config(&self) -> KeywordConfig {
        KeywordConfig {
            n_k: self.n_k,
            ..self.keyword.clone()
        }
    }
}

/// Embedding providers for the two semantic terms; they may differ.
#[derive(Clone, Copy)]
pub struct RewardProviders<'a> {
    pub keyword: &'a EmbeddingProvider,
    pub seq: &'a EmbeddingProvider,
}

impl<'a> RewardProviders<'a> {
    pub fn shared(provider: &'a EmbeddingProvider) -> Self {
        Self {
            keyword: provider,
            seq: provider,
        }
    }
}

/// Component rewards for one finished episode.
#[derive(Clone, Debug, Default)]
pub struct RewardBreakdown {
    pub r_rouge: f64,
    pub r_kw: f64,
    pub r_seq: f64,
    pub r_unified: f64,
    pub kl_per_step: Vec<f64>,
}

/// Weighted combination with the enable flags applied; no renormalization
/// under ablation.
pub fn unify(r_rouge: f64, r_kw: f64, r_seq: f64, cfg: &RewardConfig) -> f64 {
    let mut total = 0.0;
    if cfg.use_rouge {
        total += cfg.alpha1 * r_rouge;
    }
    if cfg.use_kw {
        total += cfg.alpha2 * r_kw;
    }
    if cfg.use_seq {
        total += cfg.alpha3 * r_seq;
    }
    total
}

/// Keyword set of the full document text (cache this per document when
/// scoring many rollouts).
pub fn doc_keywords(
    doc: &Document,
    cfg: &RewardConfig,
    providers: RewardProviders<'_>,
) -> Result<KeywordSet> {
    get_keywords(&doc.text_tokens(), &cfg.keyword_config(), providers.keyword)
}

/// Episode reward against the document's reference, recomputing the
/// document keyword set.
pub fn r_unified(
    summary: &Summary,
    doc: &Document,
    cfg: &RewardConfig,
    providers: RewardProviders<'_>,
) -> Result<RewardBreakdown> {
    let kd = doc_keywords(doc, cfg, providers)?;
    r_unified_with_doc_keywords(summary, doc, &kd, cfg, providers)
}

/// Episode reward with a precomputed document keyword set.
pub fn r_unified_with_doc_keywords(
    summary: &Summary,
    doc: &Document,
    doc_kws: &KeywordSet,
    cfg: &RewardConfig,
    providers: RewardProviders<'_>,
) -> Result<RewardBreakdown> {
    if doc.reference.is_empty() {
        return Err(Error::EmptyInput("document reference"));
    }
    let summary_tokens = summary.tokens(doc);

    let rouge_score = if cfg.use_rouge {
        r_rouge(&summary_tokens, &doc.reference, &cfg.rouge)
    } else {
        0.0
    };

    let kw_score = if cfg.use_kw {
        if summary_tokens.is_empty() {
            0.0
        } else {
            let ks = get_keywords(&summary_tokens, &cfg.keyword_config(), providers.keyword)?;
            r_kw(doc_kws, &ks)
        }
    } else {
        0.0
    };

    let seq_score = if cfg.use_seq {
        r_seq(&summary_tokens, &doc.reference, providers.seq, cfg.epsilon)
    } else {
        0.0
    };

    Ok(RewardBreakdown {
        r_rouge: rouge_score,
        r_kw: kw_score,
        r_seq: seq_score,
        r_unified: unify(rouge_score, kw_score, seq_score, cfg),
        kl_per_step: Vec::new(),
    })
}

/// Per-step rewards for a finished trajectory: the KL term at every step,
/// plus the episode reward at the final step. Fills
/// `breakdown.kl_per_step` with the raw log-ratios.
pub fn step_rewards(
    traj: &Trajectory,
    breakdown: &mut RewardBreakdown,
    cfg: &RewardConfig,
) -> Result<Vec<f64>> {
    if traj.p_rl.len() != traj.p_sl.len() {
        return Err(Error::LengthMismatch {
            context: "step_rewards probabilities",
            left: traj.p_rl.len(),
            right: traj.p_sl.len(),
        });
    }
    let n = traj.p_rl.len();
    let mut rewards = Vec::with_capacity(n);
    let mut kl = Vec::with_capacity(n);
    for i in 0..n {
        let log_ratio = clamp_prob(traj.p_rl[i]).ln() - clamp_prob(traj.p_sl[i]).ln();
        kl.push(log_ratio);
        let mut r = if cfg.use_kl {
            -cfg.beta_kl * log_ratio
        } else {
            0.0
        };
        if i + 1 == n {
            r += breakdown.r_unified;
        }
        rewards.push(r);
    }
    breakdown.kl_per_step = kl;
    Ok(rewards)
}
