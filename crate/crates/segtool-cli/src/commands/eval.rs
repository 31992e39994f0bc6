use std::collections::BTreeMap;

use serde::Serialize;

use segtool::evaluation::{
    ari, boundary_prf, evaluate_retrieval, parse_qrels, parse_run, quartile_split, QwvParams,
};
use segtool::resegment::read_transcripts;
use segtool::{Result, SegError};

use super::{load_instances, open_reader, write_json_report};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::settings::Settings;
use crate::{AriReportArgs, EvalRetrievalArgs, EvalSegArgs};

#[derive(Serialize)]
struct SegReport {
    precision: f64,
    recall: f64,
    f1: f64,
    instances: usize,
    positions: usize,
}

pub fn eval_seg(args: &EvalSegArgs, settings: &Settings, seed: u64) -> Result<()> {
    let pred_field = settings.resolve(
        "pred_field",
        args.pred_field.clone(),
        "labels".to_string(),
    )?;
    if pred_field != "labels" && pred_field != "gamma" {
        return Err(SegError::data(format!(
            "pred_field must be labels or gamma, got {pred_field:?}"
        )));
    }

    let preds = load_instances(&args.pred)?;
    let golds = load_instances(&args.gold)?;
    let gold_index: BTreeMap<(String, usize), &segtool::corpus::Instance> = golds
        .iter()
        .map(|inst| ((inst.doc_id.clone(), inst.index), inst))
        .collect();

    let mut pred_all: Vec<u8> = Vec::new();
    let mut gold_all: Vec<u8> = Vec::new();
    for inst in &preds {
        let key = (inst.doc_id.clone(), inst.index);
        let gold = gold_index.get(&key).ok_or_else(|| {
            SegError::data(format!(
                "instance {}:{} missing from the gold file",
                inst.doc_id, inst.index
            ))
        })?;
        let bits = match pred_field.as_str() {
            "gamma" => inst.gamma.as_ref().ok_or_else(|| {
                SegError::data(format!(
                    "instance {}:{} has no gamma field",
                    inst.doc_id, inst.index
                ))
            })?,
            _ => &inst.labels,
        };
        if bits.len() != gold.labels.len() {
            return Err(SegError::data(format!(
                "instance {}:{}: prediction and gold lengths differ",
                inst.doc_id, inst.index
            )));
        }
        pred_all.extend_from_slice(bits);
        gold_all.extend_from_slice(&gold.labels);
    }

    let (precision, recall, f1) = boundary_prf(&pred_all, &gold_all)?;
    let report = SegReport {
        precision,
        recall,
        f1,
        instances: preds.len(),
        positions: pred_all.len(),
    };

    let mut manifest = RunManifest::new("eval-seg", seed);
    manifest.set("pred_field", &pred_field);
    manifest
        .input(&args.pred)
        .input(&args.gold)
        .output(&args.output);
    manifest.write(&manifest_path_for(&args.output))?;

    write_json_report(&args.output, &report)?;
    println!("eval-seg: precision={precision:.4} recall={recall:.4} f1={f1:.4}");
    Ok(())
}

pub fn eval_retrieval(args: &EvalRetrievalArgs, settings: &Settings, seed: u64) -> Result<()> {
    let params = QwvParams {
        beta: settings.resolve("beta", args.beta, 40.0)?,
    };
    if params.beta <= 0.0 {
        return Err(SegError::data(format!("beta must be positive, got {}", params.beta)));
    }
    let threshold = settings.resolve("threshold", args.threshold, 0.0)?;

    let run = parse_run(open_reader(&args.run)?)?;
    let judgments = parse_qrels(open_reader(&args.qrels)?)?;
    for qid in run.queries.keys() {
        if !judgments.relevant.contains_key(qid) {
            eprintln!("warning: query {qid} has no judgments; skipping");
        }
    }

    let report = evaluate_retrieval(&run, &judgments, &params, threshold, args.rank_sweep)?;

    let mut manifest = RunManifest::new("eval-retrieval", seed);
    manifest
        .set("beta", params.beta)
        .set("threshold", threshold)
        .set("rank_sweep", args.rank_sweep);
    manifest
        .input(&args.run)
        .input(&args.qrels)
        .output(&args.output);
    manifest.write(&manifest_path_for(&args.output))?;

    write_json_report(&args.output, &report)?;
    println!(
        "eval-retrieval: mqwv={:.4} aqwv@{}={:.4} queries={}",
        report.mqwv,
        threshold,
        report.aqwv_at_threshold,
        report.per_query.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct AriReport {
    per_document: BTreeMap<String, f64>,
    /// Document ids bucketed by ascending readability score; the last
    /// quartile holds the most complex documents.
    quartiles: [Vec<String>; 4],
}

pub fn ari_report(args: &AriReportArgs, _settings: &Settings, seed: u64) -> Result<()> {
    let transcripts = read_transcripts(open_reader(&args.input)?)?;
    let mut scored: Vec<(String, f64)> = Vec::with_capacity(transcripts.len());
    let mut per_document = BTreeMap::new();
    for t in &transcripts {
        let score = ari(t)?;
        per_document.insert(t.doc_id.clone(), score);
        scored.push((t.doc_id.clone(), score));
    }
    let buckets = quartile_split(&scored)?;
    let report = AriReport {
        per_document,
        quartiles: buckets.map(|b| b.into_iter().map(|(id, _)| id).collect()),
    };

    let mut manifest = RunManifest::new("ari-report", seed);
    manifest.input(&args.input).output(&args.output);
    manifest.write(&manifest_path_for(&args.output))?;

    write_json_report(&args.output, &report)?;
    println!("ari-report: documents={}", report.per_document.len());
    Ok(())
}
