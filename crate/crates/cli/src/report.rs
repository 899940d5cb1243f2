//! Evaluation reports: per-document ROUGE F1 (x100), corpus means with
//! seeded 95% bootstrap confidence intervals (1000 resamples), and the
//! table/JSON renderers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lexsum_core::corpus::{Document, Summary};
use lexsum_core::metrics::{rouge_l, rouge_n};
use lexsum_core::RougeConfig;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRow {
    pub name: String,
    pub rouge1: MetricSummary,
    pub rouge2: MetricSummary,
    pub rouge_l: MetricSummary,
    /// Mean of the three F1 scores.
    pub r_rouge: MetricSummary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerDocScore {
    pub id: String,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

impl PerDocScore {
    pub fn r_rouge(&self) -> f64 {
        (self.rouge1 + self.rouge2 + self.rouge_l) / 3.0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub per_doc: Vec<PerDocScore>,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

pub fn crate_version() -> String {
    format!("lexsum {}", env!("CARGO_PKG_VERSION"))
}

/// Score one summary per document against its reference; all values x100.
pub fn score_summaries(
    docs: &[Document],
    summaries: &[Summary],
    cfg: &RougeConfig,
) -> Vec<PerDocScore> {
    docs.iter()
        .zip(summaries)
        .map(|(doc, summary)| {
            let cand = summary.tokens(doc);
            PerDocScore {
                id: doc.id.clone(),
                rouge1: 100.0 * rouge_n(&cand, &doc.reference, 1, cfg).f1,
                rouge2: 100.0 * rouge_n(&cand, &doc.reference, 2, cfg).f1,
                rouge_l: 100.0 * rouge_l(&cand, &doc.reference, cfg).f1,
            }
        })
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn bootstrap_metric<F: Fn(&PerDocScore) -> f64>(
    scores: &[PerDocScore],
    extract: F,
    rng_seed: u64,
) -> MetricSummary {
    let n = scores.len();
    let values: Vec<f64> = scores.iter().map(&extract).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut resampled = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let total: f64 = (0..n).map(|_| values[rng.gen_range(0..n)]).sum();
        resampled.push(total / n as f64);
    }
    resampled.sort_by(f64::total_cmp);
    MetricSummary {
        mean,
        ci_lo: percentile(&resampled, 0.025),
        ci_hi: percentile(&resampled, 0.975),
    }
}

/// Corpus-level row with per-metric bootstrap CIs. The four metrics share
/// the same resample indices per metric seed stream derived from `seed`.
pub fn bootstrap_row(name: &str, scores: &[PerDocScore], seed: u64) -> EvalRow {
    assert!(!scores.is_empty(), "no documents to evaluate");
    EvalRow {
        name: name.to_string(),
        rouge1: bootstrap_metric(scores, |s| s.rouge1, seed),
        rouge2: bootstrap_metric(scores, |s| s.rouge2, seed),
        rouge_l: bootstrap_metric(scores, |s| s.rouge_l, seed),
        r_rouge: bootstrap_metric(scores, |s| s.r_rouge(), seed),
    }
}

fn fmt_metric(m: &MetricSummary) -> String {
    format!("{:6.2} [{:6.2}, {:6.2}]", m.mean, m.ci_lo, m.ci_hi)
}

/// Human table: one row per evaluated model.
pub fn render_table(rows: &[EvalRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<26} {:<26} {:<26} {:<26}\n",
        "model", "ROUGE-1", "ROUGE-2", "ROUGE-L", "R_ROUGE"
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<16} {:<26} {:<26} {:<26} {:<26}\n",
            row.name,
            fmt_metric(&row.rouge1),
            fmt_metric(&row.rouge2),
            fmt_metric(&row.rouge_l),
            fmt_metric(&row.r_rouge),
        ));
    }
    out
}
