use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use segtool::corpus::bpe::{encode_instance, train_subwords_from_words, SubwordModel};
use segtool::corpus::{
    chunk_document, default_punct_set, downsample_documents, parse_subtitles, split_train_valid,
    CorpusPrepConfig, Instance, SubtitleDocument,
};
use segtool::seed::{rng_for, rng_for_unit};
use segtool::{Result, SegError};

use super::{create_writer, open_reader, store_instances};
use crate::manifest::RunManifest;
use crate::settings::Settings;
use crate::PrepArgs;

pub fn prep(args: &PrepArgs, settings: &Settings, seed: u64, _jobs: usize) -> Result<()> {
    let cfg = CorpusPrepConfig {
        min_len: settings.resolve("min_len", args.min_len, 1)?,
        max_len: settings.resolve("max_len", args.max_len, 100)?,
        train_fraction: settings.resolve("train_fraction", args.train_fraction, 0.9)?,
        max_documents: settings.resolve("max_documents", args.max_documents, 2000)?,
        seed,
    };
    cfg.validate()?;
    let merges = settings.resolve("merges", args.merges, 32_000)?;

    let mut docs = Vec::new();
    for dir in &args.inputs {
        docs.extend(read_document_dir(dir)?);
    }
    if docs.is_empty() {
        return Err(SegError::data("no subtitle documents found in the input directories"));
    }
    let mut seen: HashSet<&str> = HashSet::new();
    for doc in &docs {
        if !seen.insert(&doc.doc_id) {
            return Err(SegError::data(format!("duplicate document id {:?}", doc.doc_id)));
        }
    }

    let mut sample_rng = rng_for(seed, "downsample");
    let docs = downsample_documents(docs, cfg.max_documents, &mut sample_rng);
    let doc_count = docs.len();

    // Parse and chunk per document; the per-document seed keeps the result
    // independent of worker count.
    let punct = default_punct_set();
    let parsed: Vec<(Vec<String>, Vec<Instance>)> = docs
        .par_iter()
        .map(|doc| {
            let (tokens, labels) = parse_subtitles(doc, &punct);
            let mut rng = rng_for_unit(seed, "chunk", &doc.doc_id);
            let instances = chunk_document(&doc.doc_id, &tokens, &labels, &cfg, &mut rng);
            (tokens, instances)
        })
        .collect();

    let subwords = match &args.bpe_model {
        Some(path) => SubwordModel::load(open_reader(path)?)?,
        None => {
            let words = parsed.iter().flat_map(|(tokens, _)| tokens.iter());
            train_subwords_from_words(words.map(String::as_str), merges)?
        }
    };

    let encoded: Vec<Instance> = parsed
        .par_iter()
        .flat_map_iter(|(_, instances)| instances.iter().map(|inst| encode_instance(inst, &subwords)))
        .collect();
    let total_instances = encoded.len();
    let total_boundaries: u64 = encoded
        .iter()
        .flat_map(|i| i.labels.iter())
        .map(|&l| l as u64)
        .sum();
    let total_tokens: u64 = encoded.iter().map(|i| i.tokens.len() as u64).sum();

    let mut split_rng = rng_for(seed, "split");
    let (train, valid) = split_train_valid(encoded, &cfg, &mut split_rng)?;

    let train_path = args.out_dir.join("train.jsonl");
    let valid_path = args.out_dir.join("valid.jsonl");
    let bpe_path = args.out_dir.join("bpe.model");

    let mut manifest = RunManifest::new("prep", seed);
    manifest
        .set("min_len", cfg.min_len)
        .set("max_len", cfg.max_len)
        .set("train_fraction", cfg.train_fraction)
        .set("max_documents", cfg.max_documents)
        .set("merges", merges);
    for dir in &args.inputs {
        manifest.input(dir);
    }
    if let Some(path) = &args.bpe_model {
        manifest.input(path);
    }
    manifest.output(&train_path).output(&valid_path);
    if args.bpe_model.is_none() {
        manifest.output(&bpe_path);
    }
    manifest.write(&args.out_dir.join("manifest.json"))?;

    store_instances(&train_path, &train)?;
    store_instances(&valid_path, &valid)?;
    if args.bpe_model.is_none() {
        let mut writer = create_writer(&bpe_path)?;
        subwords.save(&mut writer)?;
        writer.flush()?;
    }

    println!(
        "prep: documents={doc_count} instances={total_instances} train={} valid={} \
         avg_segments={:.4} avg_tokens={:.2}",
        train.len(),
        valid.len(),
        total_boundaries as f64 / total_instances.max(1) as f64,
        total_tokens as f64 / total_instances.max(1) as f64,
    );
    Ok(())
}

fn read_document_dir(dir: &Path) -> Result<Vec<SubtitleDocument>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| SegError::data(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut docs = Vec::with_capacity(files.len());
    for path in files {
        let doc_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| SegError::data(format!("bad document filename {}", path.display())))?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| SegError::data(format!("cannot read {}: {e}", path.display())))?;
        docs.push(SubtitleDocument::new(
            doc_id,
            text.lines().map(str::to_string).collect(),
        ));
    }
    Ok(docs)
}
