//! `lexsum`: train and evaluate an extractive summarizer — supervised
//! pretraining on greedy ROUGE oracle labels, PPO/REINFORCE fine-tuning
//! under a combined lexical/semantic reward, evaluation with bootstrap
//! confidence intervals, and an ablation runner.
//!
//! Exit codes: 0 ok, 2 input error, 3 numeric failure, 4 compatibility
//! mismatch, 5 not found.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Ablation, Ctx, EvalTarget, SummarizeInput, SynthParams};
use config::RunConfig;
use lexsum_core::rl::Algorithm;

#[derive(Parser)]
#[command(name = "lexsum", version, about = "Extractive summarization with RL fine-tuning")]
struct Cli {
    /// Run configuration file (see `lexsum config init`)
    #[arg(long, global = true, value_name = "PATH", default_value = "lexsum.json")]
    config: PathBuf,
    /// Override every seed in the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config's out_dir)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Suppress progress output
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage run configuration
    Config {
        #[command(subcommand)]
        action: ConfigCmd,
    },
    /// Generate a synthetic corpus file
    Synth(SynthArgs),
    /// Supervised pretraining on greedy ROUGE oracle labels
    Pretrain,
    /// RL fine-tuning from a pretrained checkpoint
    Finetune(FinetuneArgs),
    /// Evaluate a checkpoint or the lead baseline on the test corpus
    Eval(EvalArgs),
    /// Score and summarize a single document
    Summarize(SummarizeArgs),
    /// Fine-tune and evaluate every ablation variant from one checkpoint
    Ablate(AblateArgs),
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Write a config file with full defaults
    Init {
        /// Overwrite an existing file
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Number of documents
    #[arg(long, default_value_t = 100)]
    docs: usize,
    /// Sentences per document
    #[arg(long, default_value_t = 12)]
    sentences: usize,
    /// Planted salient sentences per document
    #[arg(long, default_value_t = 3)]
    salient: usize,
    /// Filler vocabulary size
    #[arg(long, default_value_t = 120)]
    vocab: usize,
    /// Global keyword pool size
    #[arg(long, default_value_t = 30)]
    keyword_pool: usize,
    /// Reference dropout / synonym substitution rate
    #[arg(long, default_value_t = 0.25)]
    noise: f64,
    /// Output corpus file (JSON lines)
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Ppo,
    Reinforce,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblateArg {
    None,
    Kl,
    Kw,
    Seq,
}

#[derive(Args)]
struct FinetuneArgs {
    /// Optimization algorithm ("reinforce" is the no-PPO ablation)
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Ppo)]
    algorithm: AlgorithmArg,
    /// Reward component to disable
    #[arg(long, value_enum, default_value_t = AblateArg::None)]
    ablate: AblateArg,
    /// Pretrained checkpoint (default: <out>/pretrained.json)
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    None,
    Lead,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate (required unless --baseline lead)
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Evaluate a baseline instead of a checkpoint
    #[arg(long, value_enum, default_value_t = BaselineArg::None)]
    baseline: BaselineArg,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Checkpoint to score with
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Document id to look up in the configured corpora
    #[arg(long, conflicts_with = "stdin")]
    doc_id: Option<String>,
    /// Read one JSON document record from stdin
    #[arg(long)]
    stdin: bool,
    /// Also print document and summary keyword sets
    #[arg(long)]
    show_keywords: bool,
}

#[derive(Args)]
struct AblateArgs {
    /// Shared pretrained checkpoint (default: <out>/pretrained.json,
    /// pretraining first if it does not exist)
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Additionally fine-tune N random alpha-weight draws
    #[arg(long, default_value_t = 0)]
    alpha_sweep: usize,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = if cli.config.exists() {
        RunConfig::load(&cli.config)?
    } else if cli.config.as_os_str() == "lexsum.json" {
        // no config written yet: fall back to defaults
        RunConfig::default()
    } else {
        bail!("config file {} does not exist", cli.config.display());
    };
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Config {
        action: ConfigCmd::Init { force },
    } = &cli.command
    {
        return commands::cmd_config_init(&cli.config, *force);
    }
    let config = load_config(&cli)?;
    let out_dir = cli.out.clone().unwrap_or_else(|| config.out_dir.clone());
    let ctx = Ctx {
        config,
        out_dir,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Config { .. } => unreachable!("handled above"),
        Command::Synth(args) => commands::cmd_synth(
            &ctx,
            &SynthParams {
                docs: args.docs,
                sentences: args.sentences,
                salient: args.salient,
                vocab: args.vocab,
                keyword_pool: args.keyword_pool,
                noise: args.noise,
                output: args.output,
            },
        ),
        Command::Pretrain => commands::cmd_pretrain(&ctx).map(|_| ()),
        Command::Finetune(args) => {
            let algorithm = match args.algorithm {
                AlgorithmArg::Ppo => Algorithm::Ppo,
                AlgorithmArg::Reinforce => Algorithm::Reinforce,
            };
            let ablation = match args.ablate {
                AblateArg::None => Ablation::None,
                AblateArg::Kl => Ablation::Kl,
                AblateArg::Kw => Ablation::Kw,
                AblateArg::Seq => Ablation::Seq,
            };
            let out = commands::cmd_finetune(&ctx, algorithm, ablation, args.checkpoint.as_deref())?;
            ctx.say(&format!("wrote checkpoint {}", out.checkpoint.display()));
            Ok(())
        }
        Command::Eval(args) => {
            let target = match (args.baseline, &args.checkpoint) {
                (BaselineArg::Lead, _) => EvalTarget::LeadBaseline,
                (BaselineArg::None, Some(path)) => EvalTarget::Checkpoint(path),
                (BaselineArg::None, None) => {
                    bail!("eval needs --checkpoint PATH or --baseline lead")
                }
            };
            commands::cmd_eval(&ctx, target).map(|_| ())
        }
        Command::Summarize(args) => {
            let input = if args.stdin {
                SummarizeInput::Stdin
            } else if let Some(id) = &args.doc_id {
                SummarizeInput::DocId(id)
            } else {
                bail!("summarize needs --doc-id ID or --stdin")
            };
            commands::cmd_summarize(&ctx, &args.checkpoint, input, args.show_keywords)
        }
        Command::Ablate(args) => {
            commands::cmd_ablate(&ctx, args.checkpoint.as_deref(), args.alpha_sweep)
        }
    }
}

/// Exit codes: input errors 2, numeric failures 3, compatibility
/// mismatches 4, lookups 5.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core_err) = cause.downcast_ref::<lexsum_core::Error>() {
            return match core_err {
                lexsum_core::Error::NonFinite(_) => 3,
                lexsum_core::Error::FingerprintMismatch { .. } => 4,
                lexsum_core::Error::UnknownDocId(_) => 5,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
