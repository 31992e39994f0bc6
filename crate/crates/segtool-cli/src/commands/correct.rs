use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use segtool::corpus::bpe::SubwordModel;
use segtool::resegment::{
    correct_to_transcript, emit_segments, merge_channels, read_utterances, OutputFormat,
    SegmentedTranscript, TaggerPredictor, Utterance,
};
use segtool::tagger::TaggerModel;
use segtool::{Result, SegError};

use super::{create_writer, open_reader};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::settings::Settings;
use crate::CorrectArgs;

pub fn correct(args: &CorrectArgs, settings: &Settings, seed: u64, _jobs: usize) -> Result<()> {
    let model = TaggerModel::load(&mut open_reader(&args.model)?)?;
    let subwords = SubwordModel::load(open_reader(&args.bpe)?)?;
    let threshold = settings.resolve(
        "threshold",
        args.threshold,
        model.config().decision_threshold,
    )?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(SegError::data(format!(
            "threshold must be in (0, 1), got {threshold}"
        )));
    }
    let format = settings.resolve("format", args.format, OutputFormat::Lines)?;

    let utterances = read_utterances(open_reader(&args.input)?)?;
    // Documents in id order; within a (document, channel) the file order is
    // the temporal order.
    let mut docs: BTreeMap<String, BTreeMap<u8, Vec<Utterance>>> = BTreeMap::new();
    for utt in utterances {
        docs.entry(utt.doc_id.clone())
            .or_default()
            .entry(utt.channel)
            .or_default()
            .push(utt);
    }

    let mut manifest = RunManifest::new("correct", seed);
    manifest
        .set("threshold", threshold)
        .set(
            "format",
            match format {
                OutputFormat::Lines => "lines",
                OutputFormat::Jsonl => "jsonl",
            },
        );
    manifest
        .input(&args.model)
        .input(&args.bpe)
        .input(&args.input)
        .output(&args.output);
    manifest.write(&manifest_path_for(&args.output))?;

    let predictor = TaggerPredictor::new(&model, &subwords, threshold);
    let doc_list: Vec<(&String, &BTreeMap<u8, Vec<Utterance>>)> = docs.iter().collect();
    let corrected: Vec<Result<SegmentedTranscript>> = doc_list
        .par_iter()
        .map(|(_, channels)| {
            let mut per_channel: Vec<SegmentedTranscript> = channels
                .values()
                .map(|utts| correct_to_transcript(utts, &predictor))
                .collect::<Result<_>>()?;
            match per_channel.len() {
                1 => Ok(per_channel.pop().expect("one channel")),
                2 => merge_channels(&per_channel[0], &per_channel[1]),
                n => Err(SegError::data(format!("document with {n} channels"))),
            }
        })
        .collect();

    let mut writer = create_writer(&args.output)?;
    let mut doc_count = 0usize;
    let mut segment_count = 0usize;
    for result in corrected {
        let transcript = result?;
        segment_count += transcript.segments.len();
        doc_count += 1;
        writer.write_all(&emit_segments(&transcript, format)?)?;
    }
    writer.flush()?;

    println!("correct: documents={doc_count} segments={segment_count}");
    Ok(())
}
