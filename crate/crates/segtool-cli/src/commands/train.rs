use std::io::{BufRead, Write};
use std::path::Path;

use segtool::noise::{NoiseMode, NoiseParams};
use segtool::seed::derive_seed;
use segtool::tagger::{self, ModelConfig, TaggerModel, TrainOptions, TrainReport};
use segtool::{Result, SegError};

use super::{create_writer, load_instances, open_reader};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::settings::Settings;
use crate::{FinetuneArgs, TrainArgs};

pub fn train(args: &TrainArgs, settings: &Settings, seed: u64) -> Result<()> {
    let use_gamma = if args.lexical {
        false
    } else {
        settings.resolve("use_gamma", None, true)?
    };
    let cfg = ModelConfig {
        token_embed_dim: settings.resolve("token_embed_dim", args.token_embed_dim, 300)?,
        flag_embed_dim: settings.resolve("flag_embed_dim", args.flag_embed_dim, 16)?,
        hidden_units: settings.resolve("hidden_units", args.hidden_units, 512)?,
        layers: settings.resolve("layers", args.layers, 2)?,
        learning_rate: settings.resolve("learning_rate", args.learning_rate, 0.001)?,
        batch_size: settings.resolve("batch_size", args.batch_size, 32)?,
        max_epochs: settings.resolve("max_epochs", args.max_epochs, 30)?,
        patience: settings.resolve("patience", args.patience, 3)?,
        decision_threshold: settings.resolve("threshold", args.threshold, 0.5)?,
        use_gamma_input: use_gamma,
        seed,
    };
    cfg.validate()?;

    let mut options = TrainOptions {
        freeze_embeddings: settings.resolve_switch("freeze_embeddings", args.freeze_embeddings)?,
        ..TrainOptions::default()
    };
    if settings.resolve_switch("resample_noise", args.resample_noise)? {
        options.resample_noise = Some(NoiseParams {
            under_rate: settings.resolve("under_rate", args.under_rate, 0.25)?,
            over_rate: settings.resolve("over_rate", args.over_rate, 0.25)?,
            mode: settings.resolve("noise_mode", args.noise_mode, NoiseMode::Both)?,
            seed: derive_seed(seed, "resample"),
        });
    }
    if let Some(path) = &args.embeddings {
        options.pretrained_embeddings =
            Some(read_embeddings(path, cfg.token_embed_dim)?);
    }

    let train_set = load_instances(&args.train)?;
    let valid_set = load_instances(&args.valid)?;

    let mut manifest = RunManifest::new("train", seed);
    describe_config(&mut manifest, &cfg);
    manifest
        .set("freeze_embeddings", options.freeze_embeddings)
        .set("resample_noise", options.resample_noise.is_some());
    manifest.input(&args.train).input(&args.valid);
    if let Some(path) = &args.embeddings {
        manifest.input(path);
    }
    manifest.output(&args.model);
    manifest.write(&manifest_path_for(&args.model))?;

    let (model, report) = tagger::train_with_report(&train_set, &valid_set, &cfg, &options)?;
    save_model(&args.model, &model)?;
    print_report(&report);
    Ok(())
}

pub fn finetune(args: &FinetuneArgs, settings: &Settings, seed: u64) -> Result<()> {
    let base = TaggerModel::load(&mut open_reader(&args.model)?)?;
    let cfg = ModelConfig {
        learning_rate: settings.resolve(
            "learning_rate",
            args.learning_rate,
            base.config().learning_rate,
        )?,
        batch_size: settings.resolve("batch_size", args.batch_size, base.config().batch_size)?,
        max_epochs: settings.resolve("max_epochs", args.max_epochs, base.config().max_epochs)?,
        patience: settings.resolve("patience", args.patience, base.config().patience)?,
        seed,
        ..base.config().clone()
    };
    cfg.validate()?;

    let train_set = load_instances(&args.train)?;
    let valid_set = load_instances(&args.valid)?;

    let mut manifest = RunManifest::new("finetune", seed);
    describe_config(&mut manifest, &cfg);
    manifest
        .input(&args.model)
        .input(&args.train)
        .input(&args.valid)
        .output(&args.output);
    manifest.write(&manifest_path_for(&args.output))?;

    let tuned = tagger::fine_tune(&base, &train_set, &valid_set, &cfg)?;
    save_model(&args.output, &tuned)?;
    println!(
        "finetune: valid_loss {:.6} -> {:.6}",
        base.loss(&valid_set)?,
        tuned.loss(&valid_set)?
    );
    Ok(())
}

fn describe_config(manifest: &mut RunManifest, cfg: &ModelConfig) {
    manifest
        .set("token_embed_dim", cfg.token_embed_dim)
        .set("flag_embed_dim", cfg.flag_embed_dim)
        .set("hidden_units", cfg.hidden_units)
        .set("layers", cfg.layers)
        .set("learning_rate", cfg.learning_rate)
        .set("batch_size", cfg.batch_size)
        .set("max_epochs", cfg.max_epochs)
        .set("patience", cfg.patience)
        .set("threshold", cfg.decision_threshold)
        .set("use_gamma", cfg.use_gamma_input);
}

fn save_model(path: &Path, model: &TaggerModel) -> Result<()> {
    let mut writer = create_writer(path)?;
    model.save(&mut writer)?;
    writer.flush()?;
    Ok(())
}

fn print_report(report: &TrainReport) {
    for stats in &report.epochs {
        println!(
            "epoch {:>3}: train_loss {:.6} valid_loss {:.6}",
            stats.epoch, stats.train_loss, stats.valid_loss
        );
    }
    println!(
        "best epoch {} with valid_loss {:.6}",
        report.best_epoch, report.best_valid_loss
    );
}

/// Pretrained embedding files: one "word v1 v2 ... vD" line per word.
fn read_embeddings(path: &Path, dim: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let reader = open_reader(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields
            .next()
            .ok_or_else(|| SegError::data(format!("embeddings line {}: empty", lineno + 1)))?
            .to_string();
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    SegError::data(format!(
                        "embeddings line {}: bad value {f:?}",
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(SegError::data(format!(
                "embeddings line {}: expected {dim} values, got {}",
                lineno + 1,
                values.len()
            )));
        }
        rows.push((word, values));
    }
    Ok(rows)
}
