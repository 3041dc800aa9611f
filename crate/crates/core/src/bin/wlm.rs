use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wlm::experiment::{self as exp, RunConfig};
use wlm::nnet::Objective;

#[derive(Parser)]
#[command(name = "wlm", version, about = "Warped language model pretraining and noisy SLU experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pretraining objective: mlm or wlm
    #[arg(long, global = true)]
    objective: Option<Objective>,
    /// Vocabulary file
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    /// Training corpus, one sentence per line
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    val_corpus: Option<PathBuf>,
    /// Model size preset: desk or full
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    ft_epochs: Option<usize>,
    /// Comma-separated fine-tuning seeds
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a vocabulary from the training corpus
    BuildVocab {
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain an encoder under the chosen objective
    Pretrain {
        #[arg(long)]
        out: PathBuf,
    },
    /// Show how one sentence is warped
    WarpPreview {
        sentence: String,
        #[arg(long)]
        json: bool,
    },
    /// Corrupt an SLU dataset with simulated recognition errors
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Noise preset: none, train_val or test
        #[arg(long, default_value = "test")]
        preset: String,
    },
    /// Fine-tune a pretrained encoder on the SLU task, once per seed
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Score a fine-tuned checkpoint or a predictions file on a test set
    Evaluate {
        #[arg(long, conflicts_with = "predictions")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        test: PathBuf,
    },
    /// Run the objective x setting x seed matrix and print the report
    Experiment,
}

fn config(common: &Common, command: &Command) -> wlm::Result<RunConfig> {
    let base = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig {
        objective: common.objective,
        seed: common.seed,
        vocab: common.vocab.clone(),
        corpus: common.corpus.clone(),
        val_corpus: common.val_corpus.clone(),
        model: common.model.clone(),
        epochs: common.epochs,
        ft_epochs: common.ft_epochs,
        seeds: common.seeds.clone(),
        out_dir: common.out_dir.clone(),
        ..RunConfig::default()
    };
    if let Command::Finetune { train, val, test, .. } = command {
        flags.slu_train = train.clone();
        flags.slu_val = val.clone();
        flags.slu_test = test.clone();
    }
    Ok(base.overlay(&flags))
}

fn run(cli: Cli) -> wlm::Result<()> {
    let cfg = config(&cli.common, &cli.command)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::BuildVocab { out: path } => exp::cmd_build_vocab(&cfg, path, &mut out).map(drop),
        Command::Pretrain { out: path } => exp::cmd_pretrain(&cfg, path, &mut out).map(drop),
        Command::WarpPreview { sentence, json } => exp::cmd_warp_preview(&cfg, sentence, *json, &mut out),
        Command::Corrupt { input, out: path, preset } => exp::cmd_corrupt(&cfg, input, path, preset, &mut out),
        Command::Finetune { checkpoint, .. } => exp::cmd_finetune(&cfg, checkpoint, &mut out).map(drop),
        Command::Evaluate { checkpoint, predictions, test } => {
            exp::cmd_evaluate(&cfg, checkpoint.as_deref(), predictions.as_deref(), test, &mut out).map(drop)
        }
        Command::Experiment => exp::cmd_experiment(&cfg, &mut out, |msg| eprintln!("{msg}")).map(drop),
    }?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
