//! Corpus ingestion, tokenization, greedy ROUGE oracle labels, the lead-m
//! baseline, and a seeded synthetic-corpus generator for controlled
//! end-to-end experiments.
//!
//! Corpus files are UTF-8 JSON lines; each line carries `id` (string),
//! `sentences` (non-empty array of strings) and `summary` (string or array
//! of strings). Unknown fields are ignored, so generator diagnostics such as
//! `salient_indices` round-trip harmlessly.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{r_rouge, RougeConfig};
use crate::{Error, Result};

/// Characters detached as standalone tokens by [`tokenize`].
const PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '\'', '"'];

/// An ordered sequence of lowercase tokens. Invariant: no empty tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        Self { tokens }
    }

    pub fn from_strs(tokens: &[&str]) -> Self {
        Self::new(tokens.iter().map(|t| t.to_string()).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Concatenate several sequences in order.
    pub fn concat<'a, I: IntoIterator<Item = &'a TokenSeq>>(parts: I) -> Self {
        let mut tokens = Vec::new();
        for p in parts {
            tokens.extend(p.tokens.iter().cloned());
        }
        Self { tokens }
    }

    /// Space-join the tokens (the inverse of [`tokenize`] up to whitespace).
    pub fn join_spaced(&self) -> String {
        self.tokens.join(" ")
    }
}

/// One source sentence: raw text plus its tokenization and document position.
#[derive(Clone, Debug)]
pub struct Sentence {
    pub raw: String,
    pub tokens: TokenSeq,
    pub index: usize,
}

/// A document: ordered sentences plus the gold reference summary tokens.
#[derive(Clone, Debug)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
    pub reference: TokenSeq,
}

impl Document {
    /// Build a document from raw sentence strings and reference text,
    /// tokenizing and validating the invariants.
    pub fn new(id: impl Into<String>, raw_sentences: &[String], reference_text: &str) -> Result<Self> {
        let id = id.into();
        if raw_sentences.is_empty() {
            return Err(Error::EmptySentence { doc: id, index: 0 });
        }
        let mut sentences = Vec::with_capacity(raw_sentences.len());
        for (index, raw) in raw_sentences.iter().enumerate() {
            let tokens = tokenize(raw);
            if tokens.is_empty() {
                return Err(Error::EmptySentence { doc: id, index });
            }
            sentences.push(Sentence {
                raw: raw.clone(),
                tokens,
                index,
            });
        }
        Ok(Self {
            id,
            sentences,
            reference: tokenize(reference_text),
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// All sentence tokens concatenated in document order.
    pub fn text_tokens(&self) -> TokenSeq {
        TokenSeq::concat(self.sentences.iter().map(|s| &s.tokens))
    }

    /// Tokens of the summary formed by the given (strictly increasing)
    /// sentence indices.
    pub fn summary_tokens(&self, selected: &[usize]) -> TokenSeq {
        TokenSeq::concat(selected.iter().map(|&i| &self.sentences[i].tokens))
    }
}

/// Per-sentence 0/1 oracle labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    pub labels: Vec<bool>,
}

impl LabelVector {
    pub fn num_selected(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// An extractive summary: selected sentence indices (strictly increasing)
/// plus their concatenated raw text. Empty selections are legal during RL
/// rollouts only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summary {
    pub selected: Vec<usize>,
    pub text: String,
}

impl Summary {
    /// Build from sorted, in-range sentence indices.
    pub fn from_selected(doc: &Document, selected: Vec<usize>) -> Self {
        debug_assert!(selected.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(selected.iter().all(|&i| i < doc.len()));
        let text = selected
            .iter()
            .map(|&i| doc.sentences[i].raw.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        Self { selected, text }
    }

    pub fn tokens(&self, doc: &Document) -> TokenSeq {
        doc.summary_tokens(&self.selected)
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Lowercase, split on whitespace, and detach `.,;:!?()'"` as standalone
/// tokens. Idempotent on its own space-joined output.
pub fn tokenize(text: &str) -> TokenSeq {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in lower.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if PUNCTUATION.contains(&ch) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        } else {
            current.push(ch);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenSeq { tokens }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    sentences: Vec<String>,
    summary: SummaryField,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SummaryField {
    Text(String),
    Parts(Vec<String>),
}

impl SummaryField {
    fn joined(&self) -> String {
        match self {
            SummaryField::Text(s) => s.clone(),
            SummaryField::Parts(parts) => parts.join(" "),
        }
    }
}

/// Load a JSON-lines corpus. Blank lines are skipped; any malformed line is
/// an error naming its 1-based line number.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut docs = Vec::new();
    let mut seen_ids = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(line).map_err(|e| Error::CorpusLine {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if record.sentences.is_empty() {
            return Err(Error::CorpusLine {
                line: lineno + 1,
                message: "field sentences must be a non-empty array".into(),
            });
        }
        if !seen_ids.insert(record.id.clone()) {
            return Err(Error::DuplicateDocId(record.id));
        }
        docs.push(Document::new(
            record.id,
            &record.sentences,
            &record.summary.joined(),
        )?);
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(docs)
}

/// Greedy extractive oracle: repeatedly add the sentence that most improves
/// the averaged ROUGE F1 against the reference, stopping after `m` picks or
/// when no addition strictly improves. Ties go to the lower index.
pub fn oracle_labels(doc: &Document, m: usize, cfg: &RougeConfig) -> LabelVector {
    let n = doc.len();
    let mut selected: Vec<usize> = Vec::new();
    let mut current_score = 0.0;
    while selected.len() < m {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if selected.contains(&i) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(i);
            trial.sort_unstable();
            let score = r_rouge(&doc.summary_tokens(&trial), &doc.reference, cfg);
            // strict `>` keeps the earliest index on ties
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        match best {
            Some((i, score)) if score > current_score => {
                selected.push(i);
                selected.sort_unstable();
                current_score = score;
            }
            _ => break,
        }
    }
    let labels = (0..n).map(|i| selected.contains(&i)).collect();
    LabelVector { labels }
}

/// Baseline summary of the first `min(m, n)` sentences.
pub fn lead_m(doc: &Document, m: usize) -> Summary {
    let take = m.min(doc.len());
    Summary::from_selected(doc, (0..take).collect())
}

/// Parameters of the synthetic corpus generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_docs: usize,
    pub sentences_per_doc: usize,
    /// Number of planted salient sentences per document (the generator's m).
    pub salient_per_doc: usize,
    pub vocab_size: usize,
    pub keyword_pool_size: usize,
    /// Per-token probability of dropping a token from the reference, and,
    /// independently, of replacing a kept token with its paired synonym.
    pub noise_token_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_docs == 0
            || self.sentences_per_doc == 0
            || self.salient_per_doc == 0
            || self.vocab_size == 0
            || self.keyword_pool_size == 0
        {
            return Err(Error::InvalidSpec("all counts must be positive".into()));
        }
        if self.salient_per_doc >= self.sentences_per_doc {
            return Err(Error::InvalidSpec(
                "salient_per_doc must be less than sentences_per_doc".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_token_rate) {
            return Err(Error::InvalidSpec(
                "noise_token_rate must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Generator output: documents plus the planted salient indices for
/// diagnostics (also serialized as `salient_indices` by [`SyntheticCorpus::to_jsonl`]).
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub salient: Vec<Vec<usize>>,
}

impl SyntheticCorpus {
    /// Serialize in the corpus file format, with the diagnostic
    /// `salient_indices` field that [`load_corpus`] ignores.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            id: &'a str,
            sentences: Vec<&'a str>,
            summary: String,
            salient_indices: &'a [usize],
        }
        let mut out = String::new();
        for (doc, salient) in self.documents.iter().zip(&self.salient) {
            let record = Record {
                id: &doc.id,
                sentences: doc.sentences.iter().map(|s| s.raw.as_str()).collect(),
                summary: doc.reference.join_spaced(),
                salient_indices: salient,
            };
            out.push_str(&serde_json::to_string(&record).expect("serializable record"));
            out.push('\n');
        }
        out
    }
}

/// Synonym partner of a generated token: the leading class letter is swapped
/// (`w…`↔`v…`, `k…`↔`q…`) so every vocabulary item has a paired synonym.
pub fn synthetic_synonym(token: &str) -> String {
    let mut chars = token.chars();
    let head = chars.next().unwrap_or('w');
    let swapped = match head {
        'w' => 'v',
        'v' => 'w',
        'k' => 'q',
        'q' => 'k',
        other => other,
    };
    let mut s = String::with_capacity(token.len());
    s.push(swapped);
    s.push_str(chars.as_str());
    s
}

/// Deterministically generate a corpus of documents with planted salient
/// sentences. Salient sentences mix tokens from a per-document subset of the
/// global keyword pool with filler vocabulary; the reference is a noisy
/// paraphrase (dropout + synonym substitution) of the salient sentences.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab: Vec<String> = (0..spec.vocab_size).map(|i| format!("w{i:03}")).collect();
    let pool: Vec<String> = (0..spec.keyword_pool_size)
        .map(|i| format!("k{i:03}"))
        .collect();

    let mut documents = Vec::with_capacity(spec.num_docs);
    let mut salient_out = Vec::with_capacity(spec.num_docs);
    for d in 0..spec.num_docs {
        let subset_size = (2 * spec.salient_per_doc).min(pool.len()).max(1);
        let mut pool_idx: Vec<usize> = (0..pool.len()).collect();
        pool_idx.shuffle(&mut rng);
        let doc_keywords: Vec<&String> = pool_idx[..subset_size].iter().map(|&i| &pool[i]).collect();

        let mut sent_idx: Vec<usize> = (0..spec.sentences_per_doc).collect();
        sent_idx.shuffle(&mut rng);
        let mut salient: Vec<usize> = sent_idx[..spec.salient_per_doc].to_vec();
        salient.sort_unstable();

        let mut raw_sentences = Vec::with_capacity(spec.sentences_per_doc);
        for s in 0..spec.sentences_per_doc {
            let len = rng.gen_range(9..=12);
            let is_salient = salient.contains(&s);
            // some non-salient sentences are distractors: they carry the
            // document's keywords but their filler is unrelated to the
            // reference, so keyword presence alone cannot identify saliency
            let keyword_rate = if is_salient {
                0.35
            } else if rng.gen::<f64>() < 0.45 {
                0.2
            } else {
                0.0
            };
            let mut tokens = Vec::with_capacity(len);
            for _ in 0..len {
                if rng.gen::<f64>() < keyword_rate {
                    tokens.push(doc_keywords[rng.gen_range(0..doc_keywords.len())].clone());
                } else {
                    tokens.push(vocab[rng.gen_range(0..vocab.len())].clone());
                }
            }
            raw_sentences.push(tokens.join(" "));
        }

        let mut reference_tokens: Vec<String> = Vec::new();
        for &s in &salient {
            for token in raw_sentences[s].split(' ') {
                if rng.gen::<f64>() < spec.noise_token_rate {
                    continue; // dropout
                }
                if rng.gen::<f64>() < spec.noise_token_rate {
                    reference_tokens.push(synthetic_synonym(token));
                } else {
                    reference_tokens.push(token.to_string());
                }
            }
        }
        if reference_tokens.is_empty() {
            // keep the reference non-empty even under extreme dropout
            reference_tokens.push(raw_sentences[salient[0]].split(' ').next().unwrap().to_string());
        }

        documents.push(Document::new(
            format!("d{d:05}"),
            &raw_sentences,
            &reference_tokens.join(" "),
        )?);
        salient_out.push(salient);
    }
    Ok(SyntheticCorpus {
        documents,
        salient: salient_out,
    })
}
