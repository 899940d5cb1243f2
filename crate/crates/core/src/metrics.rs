//! Lexical and semantic summary metrics: ROUGE-1/2/L F1, the averaged ROUGE
//! reward, Porter stemming, word mover's distance, and the inverse-distance
//! sequence reward.

mod porter;
mod wmd;

pub use porter::porter_stem;
pub use wmd::{max_pairwise_distance, wmd};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;
use crate::embeddings::EmbeddingProvider;
use crate::stopwords::default_stopwords;

/// Additive constant in the sequence reward denominator.
pub const DEFAULT_SEQ_EPSILON: f64 = 0.01;

/// ROUGE preprocessing switches. Stemming defaults on, stopword removal off.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RougeConfig {
    pub stemming: bool,
    pub use_stopword_removal: bool,
}

impl Default for RougeConfig {
    fn default() -> Self {
        Self {
            stemming: true,
            use_stopword_removal: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrecisionRecallF1 {
    fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn prepare(seq: &TokenSeq, cfg: &RougeConfig) -> Vec<String> {
    seq.tokens()
        .iter()
        .filter(|t| !cfg.use_stopword_removal || !default_stopwords().contains(*t))
        .map(|t| {
            if cfg.stemming {
                porter_stem(t)
            } else {
                t.clone()
            }
        })
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped multiset overlap: precision over candidate n-grams,
/// recall over reference n-grams. Either side empty of n-grams gives zeros.
pub fn rouge_n(
    candidate: &TokenSeq,
    reference: &TokenSeq,
    n: usize,
    cfg: &RougeConfig,
) -> PrecisionRecallF1 {
    debug_assert!(n >= 1);
    let cand = prepare(candidate, cfg);
    let refr = prepare(reference, cfg);
    let cand_counts = ngram_counts(&cand, n);
    let ref_counts = ngram_counts(&refr, n);
    let cand_total: usize = cand_counts.values().sum();
    let ref_total: usize = ref_counts.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return PrecisionRecallF1::default();
    }
    let overlap: usize = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    PrecisionRecallF1::new(
        overlap as f64 / cand_total as f64,
        overlap as f64 / ref_total as f64,
    )
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L over the longest common subsequence of (optionally stemmed)
/// tokens: precision L/|candidate|, recall L/|reference|.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq, cfg: &RougeConfig) -> PrecisionRecallF1 {
    let cand = prepare(candidate, cfg);
    let refr = prepare(reference, cfg);
    if cand.is_empty() || refr.is_empty() {
        return PrecisionRecallF1::default();
    }
    let l = lcs_len(&cand, &refr) as f64;
    PrecisionRecallF1::new(l / cand.len() as f64, l / refr.len() as f64)
}

/// Mean of the ROUGE-1, ROUGE-2, and ROUGE-L F1 scores.
pub fn r_rouge(candidate: &TokenSeq, reference: &TokenSeq, cfg: &RougeConfig) -> f64 {
    (rouge_n(candidate, reference, 1, cfg).f1
        + rouge_n(candidate, reference, 2, cfg).f1
        + rouge_l(candidate, reference, cfg).f1)
        / 3.0
}

/// Sequence reward `1 / (d + epsilon)` where `d` is the word mover's
/// distance to the reference. An empty candidate is scored with the finite
/// penalty distance `max pairwise distance within the reference + 1`, so
/// degenerate rollouts stay finite. The reference must be non-empty.
pub fn r_seq(
    candidate: &TokenSeq,
    reference: &TokenSeq,
    provider: &EmbeddingProvider,
    epsilon: f64,
) -> f64 {
    assert!(!reference.is_empty(), "r_seq requires a non-empty reference");
    let d = if candidate.is_empty() {
        max_pairwise_distance(reference, provider) + 1.0
    } else {
        wmd(candidate, reference, provider).expect("both sides non-empty")
    };
    1.0 / (d + epsilon)
}
