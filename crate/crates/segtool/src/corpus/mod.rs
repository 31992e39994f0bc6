//! Subtitle corpus preparation.
//!
//! Raw subtitle documents are turned into supervised training instances in
//! four steps: boundary extraction from sentence-final punctuation
//! ([`parse_subtitles`]), splitting into utterance-sized chunks
//! ([`chunk_document`]), subword encoding ([`bpe::encode_instance`]) and a
//! seeded train/validation split ([`split_train_valid`]).

pub mod bpe;

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SegError};

/// One raw subtitle document: the text of a film or episode, line per cue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtitleDocument {
    pub doc_id: String,
    pub lines: Vec<String>,
}

impl SubtitleDocument {
    pub fn new(doc_id: impl Into<String>, lines: Vec<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            lines,
        }
    }
}

/// An aligned (tokens, acoustic tags, gold tags) triple.
///
/// `gamma` is absent until noise synthesis (or ASR input) supplies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub doc_id: String,
    pub index: usize,
    pub tokens: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl Instance {
    /// Checks the alignment invariant: |tokens| = |labels| (= |gamma|), tags binary.
    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.labels.len() {
            return Err(SegError::data(format!(
                "instance {}:{} has {} tokens but {} labels",
                self.doc_id,
                self.index,
                self.tokens.len(),
                self.labels.len()
            )));
        }
        if let Some(gamma) = &self.gamma {
            if gamma.len() != self.tokens.len() {
                return Err(SegError::data(format!(
                    "instance {}:{} has {} tokens but {} gamma tags",
                    self.doc_id,
                    self.index,
                    self.tokens.len(),
                    gamma.len()
                )));
            }
            if gamma.iter().any(|&t| t > 1) {
                return Err(SegError::data("gamma tags must be 0 or 1"));
            }
        }
        if self.labels.iter().any(|&t| t > 1) {
            return Err(SegError::data("labels must be 0 or 1"));
        }
        Ok(())
    }
}

/// Knobs for corpus preparation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusPrepConfig {
    /// Shortest instance length drawn by the chunker, in tokens.
    pub min_len: usize,
    /// Longest instance length drawn by the chunker, in tokens.
    pub max_len: usize,
    /// Fraction of instances that go to the training partition.
    pub train_fraction: f64,
    /// Larger corpora are down-sampled to this many documents.
    pub max_documents: usize,
    pub seed: u64,
}

impl Default for CorpusPrepConfig {
    fn default() -> Self {
        Self {
            min_len: 1,
            max_len: 100,
            train_fraction: 0.9,
            max_documents: 2000,
            seed: 0,
        }
    }
}

impl CorpusPrepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_len < 1 || self.min_len > self.max_len {
            return Err(SegError::data(format!(
                "invalid chunk lengths: need 1 <= min_len <= max_len, got {}..{}",
                self.min_len, self.max_len
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(SegError::data(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// The sentence-final punctuation marks that imply a segment boundary.
pub fn default_punct_set() -> HashSet<char> {
    ['(', ')', ':', '-', '!', '?', '.'].into_iter().collect()
}

/// Extracts tokens and boundary labels from a subtitle document.
///
/// Text is whitespace-tokenized and lowercased. Every punctuation mark in
/// `punct_set` is removed and marks a boundary on the closest preceding
/// surviving token; runs of marks collapse into a single boundary. A hyphen
/// only counts as a mark when nothing word-like follows it inside its token
/// (standalone or word-final), so compounds like "check-in" survive.
pub fn parse_subtitles(
    doc: &SubtitleDocument,
    punct_set: &HashSet<char>,
) -> (Vec<String>, Vec<u8>) {
    let mut tokens: Vec<String> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();

    let mark_boundary = |tokens: &[String], labels: &mut Vec<u8>| {
        if !tokens.is_empty() {
            *labels.last_mut().expect("labels track tokens") = 1;
        }
    };

    for line in &doc.lines {
        for raw in line.split_whitespace() {
            let chars: Vec<char> = raw.chars().collect();
            let mut current = String::new();
            for (pos, &c) in chars.iter().enumerate() {
                let is_mark = if c == '-' {
                    // Word-internal hyphens are kept; a hyphen is a mark only
                    // when everything after it in the token is punctuation too.
                    chars[pos + 1..].iter().all(|t| punct_set.contains(t))
                } else {
                    punct_set.contains(&c)
                };
                if is_mark {
                    if !current.is_empty() {
                        tokens.push(std::mem::take(&mut current));
                        labels.push(1);
                    } else {
                        mark_boundary(&tokens, &mut labels);
                    }
                } else {
                    current.extend(c.to_lowercase());
                }
            }
            if !current.is_empty() {
                tokens.push(current);
                labels.push(0);
            }
        }
    }
    (tokens, labels)
}

/// Splits one document's token/label stream into instances whose lengths are
/// drawn uniformly from `[min_len, max_len]`. The final instance keeps the
/// remainder even when it is shorter than the drawn length, and instances
/// without any boundary are retained.
pub fn chunk_document<R: Rng>(
    doc_id: &str,
    tokens: &[String],
    labels: &[u8],
    cfg: &CorpusPrepConfig,
    rng: &mut R,
) -> Vec<Instance> {
    assert_eq!(tokens.len(), labels.len(), "tokens and labels must align");
    let mut instances = Vec::new();
    let mut pos = 0;
    while pos < tokens.len() {
        let len = rng.gen_range(cfg.min_len..=cfg.max_len);
        let end = (pos + len).min(tokens.len());
        instances.push(Instance {
            doc_id: doc_id.to_string(),
            index: instances.len(),
            tokens: tokens[pos..end].to_vec(),
            gamma: None,
            labels: labels[pos..end].to_vec(),
        });
        pos = end;
    }
    instances
}

/// Seeded shuffle followed by a split at `train_fraction`. Both partitions
/// are non-empty whenever at least two instances are supplied.
pub fn split_train_valid<R: Rng>(
    instances: Vec<Instance>,
    cfg: &CorpusPrepConfig,
    rng: &mut R,
) -> Result<(Vec<Instance>, Vec<Instance>)> {
    if instances.len() < 2 {
        return Err(SegError::data(format!(
            "need at least 2 instances to split, got {}",
            instances.len()
        )));
    }
    let mut shuffled = instances;
    shuffled.shuffle(rng);
    let n = shuffled.len();
    let n_train = ((n as f64 * cfg.train_fraction).floor() as usize).clamp(1, n - 1);
    let valid = shuffled.split_off(n_train);
    Ok((shuffled, valid))
}

/// Seeded down-sampling without replacement to at most `max_documents`.
/// Relative document order is preserved.
pub fn downsample_documents<R: Rng>(
    docs: Vec<SubtitleDocument>,
    max_documents: usize,
    rng: &mut R,
) -> Vec<SubtitleDocument> {
    if docs.len() <= max_documents {
        return docs;
    }
    let mut picks: Vec<usize> = (0..docs.len()).collect();
    picks.shuffle(rng);
    picks.truncate(max_documents);
    let keep: HashSet<usize> = picks.into_iter().collect();
    docs.into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, d)| d)
        .collect()
}

/// Reads instances from JSON-lines, validating alignment as it goes.
pub fn read_instances<R: BufRead>(reader: R) -> Result<Vec<Instance>> {
    let mut instances = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(&line)
            .map_err(|e| SegError::data(format!("line {}: {}", lineno + 1, e)))?;
        inst.validate()?;
        instances.push(inst);
    }
    Ok(instances)
}

/// Writes instances as JSON-lines, one object per instance.
pub fn write_instances<W: Write>(writer: &mut W, instances: &[Instance]) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut *writer, inst)
            .map_err(|e| SegError::data(format!("serialize instance: {e}")))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
