//! Keyword extraction and the keyword-coverage reward: candidate unigrams
//! and bigrams are ranked by embedding norm, then a greedy max-min pass
//! picks a small diverse keyword set; the reward averages, over document
//! keywords, the best cosine similarity to any summary keyword.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;
use crate::embeddings::{cosine, embed_phrase, EmbeddingProvider, Vector};
use crate::stopwords::default_stopwords;
use crate::{Error, Result};

/// Norms are compared at this resolution so exactly-normalized providers
/// (all norms within an ulp of 1) fall back to the occurrence-order tie rule
/// instead of ranking on float noise.
const NORM_QUANTUM: f64 = 1e9;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct KeywordConfig {
    /// Target keyword-set size.
    pub n_k: usize,
    /// Which n-gram sizes become candidates (subset of {1, 2}).
    pub candidate_ngrams: Vec<usize>,
    /// Tokens shorter than this never become unigram/bigram parts.
    pub min_token_len: usize,
    /// Stopword set used for candidate filtering; not serialized, defaults
    /// to the embedded list (see [`crate::stopwords`]).
    #[serde(skip, default = "default_stopword_set")]
    pub stopwords: HashSet<String>,
}

fn default_stopword_set() -> HashSet<String> {
    default_stopwords().clone()
}

impl Default for KeywordConfig {
    fn default() -> Self {
        Self {
            n_k: 3,
            candidate_ngrams: vec![1, 2],
            min_token_len: 2,
            stopwords: default_stopword_set(),
        }
    }
}

/// A selected keyword phrase with its embedding.
#[derive(Clone, Debug)]
pub struct KeywordEntry {
    pub phrase: TokenSeq,
    pub vector: Vector,
}

/// An ordered keyword set (selection order preserved).
#[derive(Clone, Debug)]
pub struct KeywordSet {
    pub entries: Vec<KeywordEntry>,
    pub n_k: usize,
}

impl KeywordSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn phrases(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.phrase.join_spaced()).collect()
    }
}

fn token_passes(token: &str, cfg: &KeywordConfig) -> bool {
    token.chars().count() >= cfg.min_token_len && !cfg.stopwords.contains(token)
}

fn collect_phrases(text: &TokenSeq, cfg: &KeywordConfig, filtered: bool) -> Vec<Vec<String>> {
    let tokens = text.tokens();
    let want_unigrams = !filtered || cfg.candidate_ngrams.contains(&1);
    let want_bigrams = filtered && cfg.candidate_ngrams.contains(&2);
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut phrases = Vec::new();
    for i in 0..tokens.len() {
        if want_unigrams && (!filtered || token_passes(&tokens[i], cfg)) {
            let phrase = vec![tokens[i].clone()];
            if seen.insert(phrase.clone()) {
                phrases.push(phrase);
            }
        }
        if want_bigrams
            && i + 1 < tokens.len()
            && token_passes(&tokens[i], cfg)
            && token_passes(&tokens[i + 1], cfg)
        {
            let phrase = vec![tokens[i].clone(), tokens[i + 1].clone()];
            if seen.insert(phrase.clone()) {
                phrases.push(phrase);
            }
        }
    }
    phrases
}

/// Candidate phrases ranked by descending embedding L2 norm (ties by first
/// occurrence), truncated to `2 * n_k`. If stopword/length filtering leaves
/// nothing, falls back to unfiltered unigrams.
pub fn candidate_phrases(
    text: &TokenSeq,
    cfg: &KeywordConfig,
    provider: &EmbeddingProvider,
) -> Result<Vec<KeywordEntry>> {
    let mut phrases = collect_phrases(text, cfg, true);
    if phrases.is_empty() {
        phrases = collect_phrases(text, cfg, false);
    }
    if phrases.is_empty() {
        return Err(Error::NoKeywordCandidates);
    }
    let mut ranked: Vec<(usize, KeywordEntry, i64)> = phrases
        .into_iter()
        .enumerate()
        .map(|(occurrence, tokens)| {
            let phrase = TokenSeq::new(tokens);
            let vector = embed_phrase(&phrase, provider);
            let norm_key = (vector.l2_norm() * NORM_QUANTUM).round() as i64;
            (occurrence, KeywordEntry { phrase, vector }, norm_key)
        })
        .collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    ranked.truncate(2 * cfg.n_k);
    Ok(ranked.into_iter().map(|(_, e, _)| e).collect())
}

/// Greedy max-min keyword selection: start from the top-ranked candidate,
/// then repeatedly add the remaining candidate whose maximum cosine to the
/// current set is smallest (ties to the higher-ranked candidate), until
/// `n_k` keywords or candidates run out.
pub fn get_keywords(
    text: &TokenSeq,
    cfg: &KeywordConfig,
    provider: &EmbeddingProvider,
) -> Result<KeywordSet> {
    let candidates = candidate_phrases(text, cfg, provider)?;
    let mut remaining: Vec<KeywordEntry> = candidates;
    let mut entries = vec![remaining.remove(0)];
    while entries.len() < cfg.n_k && !remaining.is_empty() {
        let mut best_idx = 0;
        let mut best_sim = f64::INFINITY;
        for (i, cand) in remaining.iter().enumerate() {
            let max_sim = entries
                .iter()
                .map(|e| cosine(&cand.vector, &e.vector).expect("uniform provider dim"))
                .fold(f64::NEG_INFINITY, f64::max);
            // strict `<` keeps the higher-ranked candidate on ties
            if max_sim < best_sim {
                best_sim = max_sim;
                best_idx = i;
            }
        }
        entries.push(remaining.remove(best_idx));
    }
    Ok(KeywordSet {
        entries,
        n_k: cfg.n_k,
    })
}

/// Keyword reward: for each document keyword take the best cosine to any
/// summary keyword, then average over document keywords. Empty summary set
/// scores 0 (degenerate rollouts).
pub fn r_kw(doc_keywords: &KeywordSet, summary_keywords: &KeywordSet) -> f64 {
    if doc_keywords.is_empty() || summary_keywords.is_empty() {
        return 0.0;
    }
    let total: f64 = doc_keywords
        .entries
        .iter()
        .map(|dk| {
            summary_keywords
                .entries
                .iter()
                .map(|sk| cosine(&dk.vector, &sk.vector).expect("uniform provider dim"))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    total / doc_keywords.len() as f64
}
