//! `segtool`: end-to-end pipeline for correcting ASR acoustic segmentation.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use segtool::noise::NoiseMode;
use segtool::resegment::OutputFormat;
use segtool::SegError;
use settings::Settings;

#[derive(Parser)]
#[command(name = "segtool", version, about = "ASR segmentation correction toolkit")]
struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true, env = "SEGTOOL_SEED")]
    seed: Option<u64>,

    /// Flat key=value config file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for per-document stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build training instances and a subword model from subtitle documents.
    Prep(PrepArgs),
    /// Add synthetic acoustic segmentation tags to instances.
    Synth(SynthArgs),
    /// Train the boundary tagger.
    Train(TrainArgs),
    /// Continue training an existing model on in-domain data.
    Finetune(FinetuneArgs),
    /// Re-segment ASR output with a trained model.
    Correct(CorrectArgs),
    /// Boundary precision/recall/F1 between two instance files.
    EvalSeg(EvalSegArgs),
    /// AQWV/MQWV of a retrieval run against relevance judgments.
    EvalRetrieval(EvalRetrievalArgs),
    /// Readability scores and quartile buckets for corrected documents.
    AriReport(AriReportArgs),
}

#[derive(Args)]
struct PrepArgs {
    /// Directories of subtitle documents (one UTF-8 file per document,
    /// file stem = document id). May be given multiple times.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,

    /// Where train.jsonl, valid.jsonl and bpe.model land.
    #[arg(long)]
    out_dir: PathBuf,

    /// Reuse an existing subword model instead of training one.
    #[arg(long)]
    bpe_model: Option<PathBuf>,

    /// Number of byte-pair merges to learn.
    #[arg(long)]
    merges: Option<usize>,

    #[arg(long)]
    min_len: Option<usize>,

    #[arg(long)]
    max_len: Option<usize>,

    #[arg(long)]
    train_fraction: Option<f64>,

    /// Down-sample larger corpora to this many documents.
    #[arg(long)]
    max_documents: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    input: PathBuf,

    #[arg(long)]
    output: PathBuf,

    #[arg(long)]
    under_rate: Option<f64>,

    #[arg(long)]
    over_rate: Option<f64>,

    /// both | under_only | over_only | none
    #[arg(long)]
    noise_mode: Option<NoiseMode>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,

    #[arg(long)]
    valid: PathBuf,

    /// Output model checkpoint.
    #[arg(long)]
    model: PathBuf,

    /// Optional pretrained token vectors ("word v1 v2 ..." lines).
    #[arg(long)]
    embeddings: Option<PathBuf>,

    /// Keep pretrained token embeddings fixed.
    #[arg(long)]
    freeze_embeddings: bool,

    /// Resample gamma from the gold labels every epoch.
    #[arg(long)]
    resample_noise: bool,

    /// Train without the acoustic tag input (lexical-only ablation).
    #[arg(long)]
    lexical: bool,

    #[arg(long)]
    token_embed_dim: Option<usize>,

    #[arg(long)]
    flag_embed_dim: Option<usize>,

    #[arg(long)]
    hidden_units: Option<usize>,

    #[arg(long)]
    layers: Option<usize>,

    #[arg(long)]
    learning_rate: Option<f64>,

    #[arg(long)]
    batch_size: Option<usize>,

    #[arg(long)]
    max_epochs: Option<usize>,

    #[arg(long)]
    patience: Option<usize>,

    /// Decision threshold stored with the model.
    #[arg(long)]
    threshold: Option<f64>,

    /// Noise rates used only with --resample-noise.
    #[arg(long)]
    under_rate: Option<f64>,

    #[arg(long)]
    over_rate: Option<f64>,

    #[arg(long)]
    noise_mode: Option<NoiseMode>,
}

#[derive(Args)]
struct FinetuneArgs {
    /// Input model checkpoint.
    #[arg(long)]
    model: PathBuf,

    #[arg(long)]
    train: PathBuf,

    #[arg(long)]
    valid: PathBuf,

    /// Output model checkpoint.
    #[arg(long)]
    output: PathBuf,

    #[arg(long)]
    learning_rate: Option<f64>,

    #[arg(long)]
    batch_size: Option<usize>,

    #[arg(long)]
    max_epochs: Option<usize>,

    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args)]
struct CorrectArgs {
    #[arg(long)]
    model: PathBuf,

    /// Subword model written by prep.
    #[arg(long)]
    bpe: PathBuf,

    /// ASR utterances, one JSON object per line.
    #[arg(long)]
    input: PathBuf,

    #[arg(long)]
    output: PathBuf,

    /// lines | jsonl
    #[arg(long)]
    format: Option<OutputFormat>,

    /// Boundary decision threshold; defaults to the model's.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct EvalSegArgs {
    /// Instance file holding the predictions.
    #[arg(long)]
    pred: PathBuf,

    /// Which field of the prediction file to score: labels | gamma.
    #[arg(long)]
    pred_field: Option<String>,

    /// Instance file holding the gold labels.
    #[arg(long)]
    gold: PathBuf,

    /// JSON report path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalRetrievalArgs {
    /// Run file: "query_id Q0 doc_id rank score tag" lines.
    #[arg(long)]
    run: PathBuf,

    /// Judgments: "query_id 0 doc_id rel" lines.
    #[arg(long)]
    qrels: PathBuf,

    /// JSON report path.
    #[arg(long)]
    output: PathBuf,

    /// False-alarm weight.
    #[arg(long)]
    beta: Option<f64>,

    /// Score threshold for the fixed-threshold AQWV.
    #[arg(long)]
    threshold: Option<f64>,

    /// Also report the rank-cutoff MQWV variant.
    #[arg(long)]
    rank_sweep: bool,
}

#[derive(Args)]
struct AriReportArgs {
    /// Corrected transcripts in jsonl format.
    #[arg(long)]
    input: PathBuf,

    /// JSON report path.
    #[arg(long)]
    output: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        let code = match err {
            SegError::Numeric(_) => 4,
            _ => 3,
        };
        std::process::exit(code);
    }
}

fn run(cli: Cli) -> segtool::Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.resolve("seed", cli.seed, 0u64)?;
    let jobs = settings.resolve("jobs", cli.jobs, 1usize)?;
    if jobs == 0 {
        return Err(SegError::data("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SegError::data(format!("cannot build thread pool: {e}")))?;

    pool.install(|| match &cli.command {
        Command::Prep(args) => commands::prep(args, &settings, seed, jobs),
        Command::Synth(args) => commands::synth(args, &settings, seed),
        Command::Train(args) => commands::train(args, &settings, seed),
        Command::Finetune(args) => commands::finetune(args, &settings, seed),
        Command::Correct(args) => commands::correct(args, &settings, seed, jobs),
        Command::EvalSeg(args) => commands::eval_seg(args, &settings, seed),
        Command::EvalRetrieval(args) => commands::eval_retrieval(args, &settings, seed),
        Command::AriReport(args) => commands::ari_report(args, &settings, seed),
    })
}
