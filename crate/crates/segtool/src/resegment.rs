//! Applying a trained tagger to real ASR output.
//!
//! Each acoustically derived utterance carries an implicit segmentation tag
//! sequence that is zero everywhere except its final position. Consecutive
//! utterance pairs are tagged together so the model sees context across
//! utterance ends; the two predictions every interior utterance receives are
//! resolved position-wise with logical OR. Two-channel documents are
//! corrected per channel and merged by wall-clock segment start time.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::bpe::SubwordModel;
use crate::error::{Result, SegError};
use crate::tagger::TaggerModel;

/// One time-stamped ASR token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrToken {
    pub text: String,
    pub start: f64,
    #[serde(rename = "dur")]
    pub duration: f64,
}

/// A contiguous span of ASR output delimited by acoustic pauses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub doc_id: String,
    pub channel: u8,
    pub tokens: Vec<AsrToken>,
}

impl Utterance {
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(SegError::data("utterance with empty doc_id"));
        }
        if self.channel > 1 {
            return Err(SegError::data(format!(
                "utterance channel must be 0 or 1, got {}",
                self.channel
            )));
        }
        if self.tokens.is_empty() {
            return Err(SegError::data(format!(
                "document {} has an empty utterance",
                self.doc_id
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for token in &self.tokens {
            if token.text.is_empty() {
                return Err(SegError::data(format!(
                    "document {} has a token with empty text",
                    self.doc_id
                )));
            }
            for (what, value) in [("start", token.start), ("duration", token.duration)] {
                if !value.is_finite() || value < 0.0 {
                    return Err(SegError::data(format!(
                        "document {}: token {what} must be finite and non-negative",
                        self.doc_id
                    )));
                }
            }
            if token.start < prev {
                return Err(SegError::data(format!(
                    "document {}: tokens are not ordered by start time",
                    self.doc_id
                )));
            }
            prev = token.start;
        }
        Ok(())
    }
}

/// One corrected sentence-like unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub tokens: Vec<String>,
    pub start: f64,
}

/// A document's corrected segmentation. `channel` is set while the two
/// channels are still separate and cleared by [`merge_channels`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedTranscript {
    pub doc_id: String,
    pub channel: Option<u8>,
    pub segments: Vec<Segment>,
}

/// The acoustic tag sequence of one utterance: zero everywhere except the
/// final position.
pub fn utterance_gamma(utt: &Utterance) -> Result<Vec<u8>> {
    if utt.tokens.is_empty() {
        return Err(SegError::data("cannot derive gamma for an empty utterance"));
    }
    let mut gamma = vec![0u8; utt.tokens.len()];
    *gamma.last_mut().expect("non-empty") = 1;
    Ok(gamma)
}

/// Anything that can tag a window of word-level tokens with boundary
/// decisions. The production implementation wraps the tagger plus subword
/// model; tests substitute stubs.
pub trait BoundaryPredictor {
    /// Returns one boundary bit per input token.
    fn predict_window(&self, tokens: &[&str], gamma: &[u8]) -> Result<Vec<u8>>;
}

/// Production predictor: lowercases and subword-encodes the window, projects
/// gamma onto last pieces, runs the tagger and maps predictions back to
/// words (a word is a boundary iff its final piece is).
pub struct TaggerPredictor<'a> {
    model: &'a TaggerModel,
    subwords: &'a SubwordModel,
    threshold: f64,
}

impl<'a> TaggerPredictor<'a> {
    pub fn new(model: &'a TaggerModel, subwords: &'a SubwordModel, threshold: f64) -> Self {
        Self {
            model,
            subwords,
            threshold,
        }
    }
}

impl BoundaryPredictor for TaggerPredictor<'_> {
    fn predict_window(&self, tokens: &[&str], gamma: &[u8]) -> Result<Vec<u8>> {
        let mut sub_tokens: Vec<String> = Vec::new();
        let mut sub_gamma: Vec<u8> = Vec::new();
        let mut last_piece_idx: Vec<usize> = Vec::with_capacity(tokens.len());
        for (word, &g) in tokens.iter().zip(gamma) {
            let pieces = self.subwords.encode_word(&word.to_lowercase());
            if pieces.is_empty() {
                return Err(SegError::data(format!(
                    "token {word:?} produced no subword pieces"
                )));
            }
            let n = pieces.len();
            sub_tokens.extend(pieces);
            sub_gamma.extend(std::iter::repeat(0).take(n - 1));
            sub_gamma.push(g);
            last_piece_idx.push(sub_tokens.len() - 1);
        }
        let preds = self
            .model
            .predict(&sub_tokens, &sub_gamma, self.threshold)?;
        Ok(last_piece_idx.iter().map(|&i| preds[i]).collect())
    }
}

/// Test/diagnostic predictor that echoes the acoustic tags.
pub struct EchoPredictor;

impl BoundaryPredictor for EchoPredictor {
    fn predict_window(&self, _tokens: &[&str], gamma: &[u8]) -> Result<Vec<u8>> {
        Ok(gamma.to_vec())
    }
}

/// Corrects the utterances of one (document, channel), in temporal order.
/// Consecutive utterance pairs are tagged together; every interior
/// utterance's two predictions are OR-merged per position, the endpoints
/// keep their single prediction, and the document's final token is forced to
/// be a boundary. Returns one boundary sequence per utterance.
pub fn correct_document(
    utts: &[Utterance],
    predictor: &dyn BoundaryPredictor,
) -> Result<Vec<Vec<u8>>> {
    if utts.is_empty() {
        return Ok(Vec::new());
    }
    for utt in utts {
        utt.validate()?;
        if utt.doc_id != utts[0].doc_id || utt.channel != utts[0].channel {
            return Err(SegError::data(
                "correct_document expects utterances of a single document channel",
            ));
        }
    }

    let words: Vec<Vec<&str>> = utts
        .iter()
        .map(|u| u.tokens.iter().map(|t| t.text.as_str()).collect())
        .collect();
    let gammas: Vec<Vec<u8>> = utts
        .iter()
        .map(utterance_gamma)
        .collect::<Result<_>>()?;

    let m = utts.len();
    let mut merged: Vec<Vec<u8>> = words.iter().map(|w| vec![0u8; w.len()]).collect();

    let apply = |target: &mut [u8], bits: &[u8]| {
        for (t, &b) in target.iter_mut().zip(bits) {
            *t |= b;
        }
    };

    if m == 1 {
        let bits = predict_checked(predictor, &words[0], &gammas[0])?;
        apply(&mut merged[0], &bits);
    } else {
        for i in 0..m - 1 {
            let mut window_tokens = words[i].clone();
            window_tokens.extend_from_slice(&words[i + 1]);
            let mut window_gamma = gammas[i].clone();
            window_gamma.extend_from_slice(&gammas[i + 1]);
            let bits = predict_checked(predictor, &window_tokens, &window_gamma)?;
            let split = words[i].len();
            apply(&mut merged[i], &bits[..split]);
            apply(&mut merged[i + 1], &bits[split..]);
        }
    }

    // A document always ends a segment.
    *merged
        .last_mut()
        .expect("at least one utterance")
        .last_mut()
        .expect("utterances are non-empty") = 1;
    Ok(merged)
}

fn predict_checked(
    predictor: &dyn BoundaryPredictor,
    tokens: &[&str],
    gamma: &[u8],
) -> Result<Vec<u8>> {
    let bits = predictor.predict_window(tokens, gamma)?;
    if bits.len() != tokens.len() {
        return Err(SegError::data(format!(
            "predictor returned {} bits for a {}-token window",
            bits.len(),
            tokens.len()
        )));
    }
    Ok(bits)
}

/// Cuts the utterance stream into segments at the corrected boundaries.
/// Tokens keep their original text and order; each segment starts at its
/// first token's wall-clock time.
pub fn segments_from_corrections(
    utts: &[Utterance],
    corrections: &[Vec<u8>],
) -> Result<SegmentedTranscript> {
    if utts.len() != corrections.len() {
        return Err(SegError::data(
            "one correction sequence per utterance required",
        ));
    }
    let (doc_id, channel) = match utts.first() {
        Some(u) => (u.doc_id.clone(), Some(u.channel)),
        None => (String::new(), None),
    };
    let mut segments = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut start = 0.0;
    for (utt, bits) in utts.iter().zip(corrections) {
        if bits.len() != utt.tokens.len() {
            return Err(SegError::data("correction length mismatch"));
        }
        for (token, &b) in utt.tokens.iter().zip(bits) {
            if tokens.is_empty() {
                start = token.start;
            }
            tokens.push(token.text.clone());
            if b == 1 {
                segments.push(Segment {
                    tokens: std::mem::take(&mut tokens),
                    start,
                });
            }
        }
    }
    if !tokens.is_empty() {
        segments.push(Segment { tokens, start });
    }
    Ok(SegmentedTranscript {
        doc_id,
        channel,
        segments,
    })
}

/// [`correct_document`] and [`segments_from_corrections`] in one step.
pub fn correct_to_transcript(
    utts: &[Utterance],
    predictor: &dyn BoundaryPredictor,
) -> Result<SegmentedTranscript> {
    let corrections = correct_document(utts, predictor)?;
    segments_from_corrections(utts, &corrections)
}

/// Merges two per-channel transcripts of the same document by sorting the
/// segments by start time; ties go to the lower channel, then input order.
pub fn merge_channels(
    a: &SegmentedTranscript,
    b: &SegmentedTranscript,
) -> Result<SegmentedTranscript> {
    if a.doc_id != b.doc_id {
        return Err(SegError::data(format!(
            "cannot merge transcripts of different documents ({} vs {})",
            a.doc_id, b.doc_id
        )));
    }
    let mut keyed: Vec<(f64, u8, usize, &Segment)> = Vec::new();
    for (t, fallback) in [(a, 0u8), (b, 1u8)] {
        let channel = t.channel.unwrap_or(fallback);
        for (idx, segment) in t.segments.iter().enumerate() {
            keyed.push((segment.start, channel, idx, segment));
        }
    }
    keyed.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| x.1.cmp(&y.1))
            .then_with(|| x.2.cmp(&y.2))
    });
    Ok(SegmentedTranscript {
        doc_id: a.doc_id.clone(),
        channel: None,
        segments: keyed.into_iter().map(|(_, _, _, s)| s.clone()).collect(),
    })
}

/// Output encodings for corrected transcripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// One segment per line: `doc_id<TAB>start<TAB>space-joined tokens`.
    Lines,
    /// One JSON transcript object per line.
    Jsonl,
}

impl std::str::FromStr for OutputFormat {
    type Err = SegError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lines" => Ok(OutputFormat::Lines),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(SegError::data(format!(
                "unknown output format {other:?}; expected lines|jsonl"
            ))),
        }
    }
}

/// Serializes one transcript in the requested format.
pub fn emit_segments(transcript: &SegmentedTranscript, format: OutputFormat) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        OutputFormat::Lines => {
            for segment in &transcript.segments {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    transcript.doc_id,
                    segment.start,
                    segment.tokens.join(" ")
                )?;
            }
        }
        OutputFormat::Jsonl => {
            serde_json::to_writer(&mut out, transcript)
                .map_err(|e| SegError::data(format!("serialize transcript: {e}")))?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

/// Parses transcripts written in the JSONL format.
pub fn read_transcripts<R: BufRead>(reader: R) -> Result<Vec<SegmentedTranscript>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: SegmentedTranscript = serde_json::from_str(&line)
            .map_err(|e| SegError::data(format!("line {}: {}", lineno + 1, e)))?;
        out.push(t);
    }
    Ok(out)
}

/// Parses ASR utterances from JSON-lines, validating each one.
pub fn read_utterances<R: BufRead>(reader: R) -> Result<Vec<Utterance>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let utt: Utterance = serde_json::from_str(&line)
            .map_err(|e| SegError::data(format!("line {}: {}", lineno + 1, e)))?;
        utt.validate()?;
        out.push(utt);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn utterance(doc: &str, channel: u8, words: &[&str], start: f64) -> Utterance {
        Utterance {
            doc_id: doc.into(),
            channel,
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, w)| AsrToken {
                    text: w.to_string(),
                    start: start + i as f64,
                    duration: 0.8,
                })
                .collect(),
        }
    }

    #[test]
    fn gamma_is_zero_except_final_position() {
        let utt = utterance("d", 0, &["a", "b", "c", "d", "e"], 0.0);
        assert_eq!(utterance_gamma(&utt).unwrap(), vec![0, 0, 0, 0, 1]);
        let solo = utterance("d", 0, &["a"], 0.0);
        assert_eq!(utterance_gamma(&solo).unwrap(), vec![1]);
    }

    /// Serves fixed per-window bit patterns.
    struct ScriptedPredictor {
        windows: std::cell::RefCell<Vec<Vec<u8>>>,
    }

    impl ScriptedPredictor {
        fn new(windows: Vec<Vec<u8>>) -> Self {
            Self {
                windows: std::cell::RefCell::new(windows),
            }
        }
    }

    impl BoundaryPredictor for ScriptedPredictor {
        fn predict_window(&self, tokens: &[&str], _gamma: &[u8]) -> Result<Vec<u8>> {
            let mut windows = self.windows.borrow_mut();
            let bits = windows.remove(0);
            assert_eq!(bits.len(), tokens.len());
            Ok(bits)
        }
    }

    #[test]
    fn or_merge_with_zeros_is_identity() {
        let utts = vec![
            utterance("d", 0, &["a", "b", "c"], 0.0),
            utterance("d", 0, &["d", "e", "f"], 10.0),
            utterance("d", 0, &["g", "h", "i"], 20.0),
        ];
        // Interior utterance: window 0 right part [0,1,0], window 1 left [0,0,0].
        let predictor = ScriptedPredictor::new(vec![
            vec![0, 0, 0, 0, 1, 0],
            vec![0, 0, 0, 0, 0, 0],
        ]);
        let merged = correct_document(&utts, &predictor).unwrap();
        assert_eq!(merged[1], vec![0, 1, 0]);
        // Final token forced to 1 even though no window said so.
        assert_eq!(merged[2], vec![0, 0, 1]);
    }

    #[test]
    fn echo_predictor_reproduces_the_acoustic_segmentation() {
        let utts = vec![
            utterance("d", 0, &["a", "b"], 0.0),
            utterance("d", 0, &["c"], 5.0),
            utterance("d", 0, &["d", "e", "f"], 9.0),
        ];
        let merged = correct_document(&utts, &EchoPredictor).unwrap();
        let expected: Vec<Vec<u8>> = utts.iter().map(|u| utterance_gamma(u).unwrap()).collect();
        assert_eq!(merged, expected);
    }

    #[test]
    fn single_utterance_gets_one_prediction() {
        let utts = vec![utterance("d", 0, &["a", "b", "c"], 0.0)];
        let predictor = ScriptedPredictor::new(vec![vec![1, 0, 0]]);
        let merged = correct_document(&utts, &predictor).unwrap();
        assert_eq!(merged, vec![vec![1, 0, 1]]);
    }

    #[test]
    fn empty_document_yields_empty_result() {
        let merged = correct_document(&[], &EchoPredictor).unwrap();
        assert!(merged.is_empty());
    }

    #[test]
    fn mixed_channels_are_rejected() {
        let utts = vec![
            utterance("d", 0, &["a"], 0.0),
            utterance("d", 1, &["b"], 1.0),
        ];
        assert!(correct_document(&utts, &EchoPredictor).is_err());
    }

    #[test]
    fn segments_cut_at_boundaries_and_conserve_tokens() {
        let utts = vec![
            utterance("d", 0, &["no", "is", "he"], 0.0),
            utterance("d", 0, &["in", "trouble"], 10.0),
        ];
        let corrections = vec![vec![1, 0, 0], vec![0, 1]];
        let t = segments_from_corrections(&utts, &corrections).unwrap();
        assert_eq!(t.segments.len(), 2);
        assert_eq!(t.segments[0].tokens, vec!["no"]);
        assert_eq!(t.segments[0].start, 0.0);
        assert_eq!(t.segments[1].tokens, vec!["is", "he", "in", "trouble"]);
        assert_eq!(t.segments[1].start, 1.0);

        let flat: Vec<&String> = t.segments.iter().flat_map(|s| s.tokens.iter()).collect();
        let original: Vec<&String> = utts
            .iter()
            .flat_map(|u| u.tokens.iter().map(|t| &t.text))
            .collect();
        assert_eq!(flat, original);
    }

    fn transcript(doc: &str, channel: Option<u8>, starts: &[f64]) -> SegmentedTranscript {
        SegmentedTranscript {
            doc_id: doc.into(),
            channel,
            segments: starts
                .iter()
                .enumerate()
                .map(|(i, &start)| Segment {
                    tokens: vec![format!("s{i}")],
                    start,
                })
                .collect(),
        }
    }

    #[test]
    fn merge_channels_sorts_by_start_time() {
        let a = transcript("d", Some(0), &[0.0, 5.2]);
        let b = transcript("d", Some(1), &[2.1]);
        let merged = merge_channels(&a, &b).unwrap();
        let starts: Vec<f64> = merged.segments.iter().map(|s| s.start).collect();
        assert_eq!(starts, vec![0.0, 2.1, 5.2]);
        assert_eq!(merged.segments.len(), a.segments.len() + b.segments.len());
        assert_eq!(merged.channel, None);
    }

    #[test]
    fn merge_with_empty_channel_is_identity_on_segments() {
        let a = transcript("d", Some(0), &[0.0, 1.0]);
        let b = transcript("d", Some(1), &[]);
        let merged = merge_channels(&a, &b).unwrap();
        assert_eq!(merged.segments, a.segments);
    }

    #[test]
    fn merge_ties_break_by_channel() {
        let a = transcript("d", Some(1), &[3.0]);
        let b = transcript("d", Some(0), &[3.0]);
        let merged = merge_channels(&a, &b).unwrap();
        // channel 0 first despite being the second argument
        assert_eq!(merged.segments[0].tokens, vec!["s0"]);
        assert_eq!(merged.segments[0].tokens, b.segments[0].tokens);
    }

    #[test]
    fn merge_rejects_different_documents() {
        let a = transcript("d1", Some(0), &[0.0]);
        let b = transcript("d2", Some(1), &[1.0]);
        assert!(merge_channels(&a, &b).is_err());
    }

    #[test]
    fn lines_format_emits_one_line_per_segment() {
        let t = transcript("doc7", None, &[0.0, 4.5]);
        let bytes = emit_segments(&t, OutputFormat::Lines).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "doc7\t0\ts0");
        assert_eq!(lines[1], "doc7\t4.5\ts1");
    }

    #[test]
    fn jsonl_roundtrip() {
        let t = transcript("doc7", Some(1), &[0.0, 4.5]);
        let bytes = emit_segments(&t, OutputFormat::Jsonl).unwrap();
        let back = read_transcripts(&bytes[..]).unwrap();
        assert_eq!(back, vec![t]);
    }

    #[test]
    fn unknown_format_is_an_error() {
        assert!("csv".parse::<OutputFormat>().is_err());
        assert!("lines".parse::<OutputFormat>().is_ok());
    }

    #[test]
    fn utterance_validation_catches_bad_input() {
        let mut utt = utterance("d", 0, &["a", "b"], 0.0);
        utt.tokens[1].start = utt.tokens[0].start - 1.0;
        assert!(utt.validate().is_err());

        let utt = utterance("d", 2, &["a"], 0.0);
        assert!(utt.validate().is_err());

        let mut utt = utterance("d", 0, &["a"], 0.0);
        utt.tokens.clear();
        assert!(utt.validate().is_err());
    }

    #[test]
    fn utterance_jsonl_parses() {
        let line = r#"{"doc_id":"d","channel":0,"tokens":[{"text":"hi","start":0.5,"dur":0.3}]}"#;
        let utts = read_utterances(line.as_bytes()).unwrap();
        assert_eq!(utts.len(), 1);
        assert_eq!(utts[0].tokens[0].text, "hi");
        assert_eq!(utts[0].tokens[0].duration, 0.3);
    }
}
