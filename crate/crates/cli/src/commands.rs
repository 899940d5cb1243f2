//! Subcommand implementations. Every command is deterministic given
//! (config, seed); the only wall-clock value anywhere is the `wall_ms`
//! field of training-log records.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use lexsum_core::corpus::{generate_synthetic, lead_m, load_corpus, oracle_labels, SyntheticSpec};
use lexsum_core::keywords::get_keywords;
use lexsum_core::policy::{
    check_compat, forward_doc, load_checkpoint, pretrain, save_checkpoint, select_top_m,
    PolicyParams, STATE_EXTRA_FEATURES,
};
use lexsum_core::rl::{finetune, Algorithm};
use lexsum_core::{Document, EmbeddingProvider, RewardConfig, RewardProviders, Summary};

use crate::config::{EmbeddingSpec, RunConfig};
use crate::report::{
    bootstrap_row, crate_version, render_table, score_summaries, EvalReport, EvalRow, PerDocScore,
};

pub struct Ctx {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub quiet: bool,
}

impl Ctx {
    pub fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        self.ensure_out_dir()?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn corpus(&self, which: &str, path: &Option<PathBuf>) -> Result<Vec<Document>> {
        let path = path
            .as_ref()
            .ok_or_else(|| anyhow!("config is missing {which}_corpus"))?;
        Ok(load_corpus(path)?)
    }

    fn policy_provider(&self) -> Result<EmbeddingProvider> {
        self.config.embedding.build()
    }

    fn reward_provider(&self, spec: &Option<EmbeddingSpec>) -> Result<Option<EmbeddingProvider>> {
        spec.as_ref().map(EmbeddingSpec::build).transpose()
    }

    pub fn pretrained_path(&self) -> PathBuf {
        self.out_dir.join("pretrained.json")
    }
}

/// Ablation variants of the reward scheme (the no-PPO variant switches the
/// algorithm instead).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    None,
    Kl,
    Kw,
    Seq,
}

impl Ablation {
    fn apply(self, mut cfg: RewardConfig) -> RewardConfig {
        match self {
            Ablation::None => {}
            Ablation::Kl => cfg.use_kl = false,
            Ablation::Kw => cfg.use_kw = false,
            Ablation::Seq => cfg.use_seq = false,
        }
        cfg
    }

    fn tag(self) -> &'static str {
        match self {
            Ablation::None => "full",
            Ablation::Kl => "no-kl",
            Ablation::Kw => "no-kw",
            Ablation::Seq => "no-seq",
        }
    }
}

pub fn cmd_config_init(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} already exists (use --force to overwrite)", path.display());
    }
    fs::write(path, RunConfig::default().to_json())
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote default config to {}", path.display());
    Ok(())
}

pub struct SynthParams {
    pub docs: usize,
    pub sentences: usize,
    pub salient: usize,
    pub vocab: usize,
    pub keyword_pool: usize,
    pub noise: f64,
    pub output: PathBuf,
}

pub fn cmd_synth(ctx: &Ctx, params: &SynthParams) -> Result<()> {
    let spec = SyntheticSpec {
        num_docs: params.docs,
        sentences_per_doc: params.sentences,
        salient_per_doc: params.salient,
        vocab_size: params.vocab,
        keyword_pool_size: params.keyword_pool,
        noise_token_rate: params.noise,
        seed: ctx.config.seed,
    };
    let corpus = generate_synthetic(&spec)?;
    if let Some(parent) = params.output.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&params.output, corpus.to_jsonl())
        .with_context(|| format!("writing {}", params.output.display()))?;
    ctx.say(&format!(
        "wrote {} synthetic documents to {}",
        params.docs,
        params.output.display()
    ));
    Ok(())
}

#[derive(Serialize)]
struct PretrainReport<'a> {
    epoch_loss: &'a [f64],
}

pub fn cmd_pretrain(ctx: &Ctx) -> Result<PathBuf> {
    let docs = ctx.corpus("train", &ctx.config.train_corpus)?;
    let provider = ctx.policy_provider()?;
    let reward = ctx.config.reward_config()?;
    ctx.say(&format!(
        "generating oracle labels for {} documents (m = {})",
        docs.len(),
        ctx.config.m
    ));
    let labels: Vec<_> = docs
        .iter()
        .map(|d| oracle_labels(d, ctx.config.m, &reward.rouge))
        .collect();
    let params = PolicyParams::init(
        ctx.config.head,
        provider.dim() + STATE_EXTRA_FEATURES,
        ctx.config.hidden,
        ctx.config.train.seed,
        provider.fingerprint(),
    );
    let (trained, curve) = pretrain(&params, &docs, &labels, &provider, &ctx.config.train)?;
    ctx.ensure_out_dir()?;
    let ckpt = ctx.pretrained_path();
    save_checkpoint(&trained, &ckpt)?;
    ctx.write(
        "pretrain_loss.json",
        &serde_json::to_string_pretty(&PretrainReport { epoch_loss: &curve })?,
    )?;
    ctx.say(&format!(
        "pretrained {} epochs; loss {:.6} -> {:.6}; checkpoint {}",
        curve.len(),
        curve.first().copied().unwrap_or(f64::NAN),
        curve.last().copied().unwrap_or(f64::NAN),
        ckpt.display()
    ));
    Ok(ckpt)
}

#[derive(Serialize, Deserialize)]
struct LogHeader<'a> {
    algorithm: &'a str,
    ablate: &'a str,
    seed: u64,
    use_kl: bool,
    use_kw: bool,
    use_seq: bool,
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
    beta_kl: f64,
}

pub struct FinetuneOutputs {
    pub checkpoint: PathBuf,
    pub final_params: PolicyParams,
}

pub fn cmd_finetune(
    ctx: &Ctx,
    algorithm: Algorithm,
    ablation: Ablation,
    checkpoint: Option<&Path>,
) -> Result<FinetuneOutputs> {
    let ckpt_path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.pretrained_path());
    let params_sl = load_checkpoint(&ckpt_path)?;
    let provider = ctx.policy_provider()?;
    check_compat(&params_sl, &provider)?;
    let kw_provider = ctx.reward_provider(&ctx.config.keyword_embedding)?;
    let seq_provider = ctx.reward_provider(&ctx.config.seq_embedding)?;
    let providers = RewardProviders {
        keyword: kw_provider.as_ref().unwrap_or(&provider),
        seq: seq_provider.as_ref().unwrap_or(&provider),
    };
    let docs = ctx.corpus("train", &ctx.config.train_corpus)?;
    let reward = ablation.apply(ctx.config.reward_config()?);
    let algo_tag = match algorithm {
        Algorithm::Ppo => "ppo",
        Algorithm::Reinforce => "reinforce",
    };
    let label = format!("{algo_tag}-{}", ablation.tag());
    ctx.say(&format!(
        "fine-tuning [{label}] for {} updates x {} rollouts",
        ctx.config.ppo.max_updates, ctx.config.ppo.rollouts_per_update
    ));
    let outcome = finetune(
        &params_sl,
        &docs,
        &reward,
        &ctx.config.ppo,
        algorithm,
        &provider,
        providers,
    )?;
    let mut log_lines = serde_json::to_string(&LogHeader {
        algorithm: algo_tag,
        ablate: ablation.tag(),
        seed: ctx.config.ppo.seed,
        use_kl: reward.use_kl,
        use_kw: reward.use_kw,
        use_seq: reward.use_seq,
        alpha1: reward.alpha1,
        alpha2: reward.alpha2,
        alpha3: reward.alpha3,
        beta_kl: reward.beta_kl,
    })?;
    log_lines.push('\n');
    for record in &outcome.log {
        log_lines.push_str(&serde_json::to_string(record)?);
        log_lines.push('\n');
    }
    let log_path = ctx.write(&format!("train-{label}.jsonl"), &log_lines)?;
    let out_ckpt = ctx.out_dir.join(format!("finetuned-{label}.json"));
    save_checkpoint(&outcome.params, &out_ckpt)?;
    if let Some(last) = outcome.log.last() {
        ctx.say(&format!(
            "final update {}: mean_r_unified {:.4}, mean_kl {:.5} (log {})",
            last.update,
            last.mean_r_unified,
            last.mean_kl,
            log_path.display()
        ));
    }
    Ok(FinetuneOutputs {
        checkpoint: out_ckpt,
        final_params: outcome.params,
    })
}

pub enum EvalTarget<'a> {
    Checkpoint(&'a Path),
    LeadBaseline,
}

/// Top-m summaries for every document under a checkpoint.
fn checkpoint_summaries(
    docs: &[Document],
    params: &PolicyParams,
    provider: &EmbeddingProvider,
    m: usize,
) -> Result<Vec<Summary>> {
    docs.iter()
        .map(|doc| {
            let probs = forward_doc(params, doc, provider)?;
            Ok(Summary::from_selected(doc, select_top_m(&probs, m)))
        })
        .collect()
}

pub fn cmd_eval(ctx: &Ctx, target: EvalTarget<'_>) -> Result<EvalReport> {
    let docs = ctx.corpus("test", &ctx.config.test_corpus)?;
    let reward = ctx.config.reward_config()?;
    let (name, summaries) = match target {
        EvalTarget::LeadBaseline => (
            "lead-m".to_string(),
            docs.iter().map(|d| lead_m(d, ctx.config.m)).collect(),
        ),
        EvalTarget::Checkpoint(path) => {
            let params = load_checkpoint(path)?;
            let provider = ctx.policy_provider()?;
            check_compat(&params, &provider)?;
            (
                "checkpoint".to_string(),
                checkpoint_summaries(&docs, &params, &provider, ctx.config.m)?,
            )
        }
    };
    let per_doc = score_summaries(&docs, &summaries, &reward.rouge);
    let row = bootstrap_row(&name, &per_doc, ctx.config.seed);
    let report = EvalReport {
        rows: vec![row],
        per_doc,
        config_hash: ctx.config.config_hash(),
        seed: ctx.config.seed,
        version: crate_version(),
    };
    ctx.write(
        &format!("eval-{name}.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    print!("{}", render_table(&report.rows));
    Ok(report)
}

#[derive(Deserialize)]
struct StdinRecord {
    #[serde(default = "default_stdin_id")]
    id: String,
    sentences: Vec<String>,
    #[serde(default)]
    summary: StdinSummary,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StdinSummary {
    Text(String),
    Parts(Vec<String>),
}

impl Default for StdinSummary {
    fn default() -> Self {
        StdinSummary::Text(String::new())
    }
}

fn default_stdin_id() -> String {
    "stdin".to_string()
}

pub enum SummarizeInput<'a> {
    DocId(&'a str),
    Stdin,
}

pub fn cmd_summarize(
    ctx: &Ctx,
    checkpoint: &Path,
    input: SummarizeInput<'_>,
    show_keywords: bool,
) -> Result<()> {
    let doc = match input {
        SummarizeInput::Stdin => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            let record: StdinRecord =
                serde_json::from_str(buf.trim()).context("parsing document from stdin")?;
            let summary_text = match record.summary {
                StdinSummary::Text(s) => s,
                StdinSummary::Parts(parts) => parts.join(" "),
            };
            Document::new(record.id, &record.sentences, &summary_text)?
        }
        SummarizeInput::DocId(id) => {
            let mut found = None;
            for path in [
                &ctx.config.test_corpus,
                &ctx.config.valid_corpus,
                &ctx.config.train_corpus,
            ]
            .into_iter()
            .flatten()
            {
                let docs = load_corpus(path)?;
                if let Some(doc) = docs.into_iter().find(|d| d.id == id) {
                    found = Some(doc);
                    break;
                }
            }
            found.ok_or(lexsum_core::Error::UnknownDocId(id.to_string()))?
        }
    };
    let params = load_checkpoint(checkpoint)?;
    let provider = ctx.policy_provider()?;
    check_compat(&params, &provider)?;
    let probs = forward_doc(&params, &doc, &provider)?;
    let selected = select_top_m(&probs, ctx.config.m);
    let summary = Summary::from_selected(&doc, selected.clone());
    println!("document {} ({} sentences)", doc.id, doc.len());
    for (i, sentence) in doc.sentences.iter().enumerate() {
        let mark = if selected.contains(&i) { "*" } else { " " };
        println!("{mark} [{i:>3}] {:.4}  {}", probs[i], sentence.raw);
    }
    println!("selected: {selected:?}");
    println!("summary: {}", summary.text);
    if show_keywords {
        let reward = ctx.config.reward_config()?;
        let kw_provider = ctx.reward_provider(&ctx.config.keyword_embedding)?;
        let kw_provider = kw_provider.as_ref().unwrap_or(&provider);
        let kd = get_keywords(&doc.text_tokens(), &reward.keyword_config(), kw_provider)?;
        println!("document keywords: {}", kd.phrases().join(" | "));
        let tokens = summary.tokens(&doc);
        if tokens.is_empty() {
            println!("summary keywords: (empty summary)");
        } else {
            let ks = get_keywords(&tokens, &reward.keyword_config(), kw_provider)?;
            println!("summary keywords: {}", ks.phrases().join(" | "));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AblateReport {
    rows: Vec<EvalRow>,
    config_hash: String,
    seed: u64,
    version: String,
}

fn eval_params_row(
    ctx: &Ctx,
    name: &str,
    params: &PolicyParams,
    docs: &[Document],
    provider: &EmbeddingProvider,
) -> Result<(EvalRow, Vec<PerDocScore>)> {
    let reward = ctx.config.reward_config()?;
    let summaries = checkpoint_summaries(docs, params, provider, ctx.config.m)?;
    let per_doc = score_summaries(docs, &summaries, &reward.rouge);
    Ok((bootstrap_row(name, &per_doc, ctx.config.seed), per_doc))
}

pub fn cmd_ablate(ctx: &Ctx, checkpoint: Option<&Path>, alpha_sweep: usize) -> Result<()> {
    let ckpt_path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => {
            let default = ctx.pretrained_path();
            if !default.exists() {
                ctx.say("no pretrained checkpoint found; running pretrain first");
                cmd_pretrain(ctx)?
            } else {
                default
            }
        }
    };
    let test_docs = ctx.corpus("test", &ctx.config.test_corpus)?;
    let provider = ctx.policy_provider()?;
    let baseline = load_checkpoint(&ckpt_path)?;
    check_compat(&baseline, &provider)?;

    let mut rows = Vec::new();
    let (row, _) = eval_params_row(ctx, "supervised", &baseline, &test_docs, &provider)?;
    rows.push(row);
    let variants: [(&str, Algorithm, Ablation); 5] = [
        ("full", Algorithm::Ppo, Ablation::None),
        ("no-kl", Algorithm::Ppo, Ablation::Kl),
        ("no-ppo", Algorithm::Reinforce, Ablation::None),
        ("no-kw", Algorithm::Ppo, Ablation::Kw),
        ("no-seq", Algorithm::Ppo, Ablation::Seq),
    ];
    for (name, algorithm, ablation) in variants {
        let out = cmd_finetune(ctx, algorithm, ablation, Some(&ckpt_path))?;
        let (row, _) = eval_params_row(ctx, name, &out.final_params, &test_docs, &provider)?;
        rows.push(row);
    }

    if alpha_sweep > 0 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ctx.config.seed);
        let train_docs = ctx.corpus("train", &ctx.config.train_corpus)?;
        let base_reward = ctx.config.reward_config()?;
        for trial in 0..alpha_sweep {
            let raw: [f64; 3] = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let total: f64 = raw.iter().sum();
            let reward = RewardConfig {
                alpha1: raw[0] / total,
                alpha2: raw[1] / total,
                alpha3: raw[2] / total,
                ..base_reward.clone()
            };
            let outcome = finetune(
                &baseline,
                &train_docs,
                &reward,
                &ctx.config.ppo,
                Algorithm::Ppo,
                &provider,
                RewardProviders::shared(&provider),
            )?;
            let name = format!(
                "sweep{}[{:.2}/{:.2}/{:.2}]",
                trial, reward.alpha1, reward.alpha2, reward.alpha3
            );
            let (row, _) = eval_params_row(ctx, &name, &outcome.params, &test_docs, &provider)?;
            rows.push(row);
        }
    }

    let report = AblateReport {
        rows: rows.clone(),
        config_hash: ctx.config.config_hash(),
        seed: ctx.config.seed,
        version: crate_version(),
    };
    ctx.write("ablate.json", &serde_json::to_string_pretty(&report)?)?;
    print!("{}", render_table(&rows));
    Ok(())
}
