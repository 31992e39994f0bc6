//! Byte-pair-encoding subword model.
//!
//! Merges are learned over word frequencies with the classic end-of-word
//! marker scheme; encoded pieces carry the `@@` continuation suffix on every
//! non-final piece of a word, so decoding is the exact inverse of encoding.
//! Equal-frequency merge candidates are broken lexicographically to keep
//! training deterministic across runs and platforms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::corpus::{default_punct_set, parse_subtitles, Instance, SubtitleDocument};
use crate::error::{Result, SegError};

/// Marks the word-final symbol during training and encoding.
const END_OF_WORD: &str = "</w>";
/// Suffix on every non-final piece of an encoded word.
const CONTINUATION: &str = "@@";
/// Reserved token for words containing characters unseen at training time.
pub const UNKNOWN_TOKEN: &str = "<unk>";

/// A trained subword model: ordered merges plus the piece vocabulary and the
/// character alphabet observed at training time.
#[derive(Debug, Clone)]
pub struct SubwordModel {
    merges: Vec<(String, String)>,
    merge_rank: HashMap<(String, String), usize>,
    vocabulary: BTreeSet<String>,
    /// Characters seen in training; `None` when the model was loaded from a
    /// file that predates alphabet headers (every character then counts as
    /// known).
    alphabet: Option<BTreeSet<char>>,
    unknown: String,
}

impl SubwordModel {
    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn unknown_token(&self) -> &str {
        &self.unknown
    }

    /// Encodes one word into subword pieces. A word containing characters
    /// outside the training alphabet maps to the unknown token.
    pub fn encode_word(&self, word: &str) -> Vec<String> {
        if word.is_empty() {
            return Vec::new();
        }
        if let Some(alphabet) = &self.alphabet {
            if word.chars().any(|c| !alphabet.contains(&c)) {
                return vec![self.unknown.clone()];
            }
        }
        let mut symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        let last = symbols.last_mut().expect("word is non-empty");
        last.push_str(END_OF_WORD);

        // Repeatedly apply the best-ranked merge present in the word.
        loop {
            let mut best: Option<(usize, usize)> = None; // (rank, position)
            for i in 0..symbols.len() - 1 {
                let key = (symbols[i].clone(), symbols[i + 1].clone());
                if let Some(&rank) = self.merge_rank.get(&key) {
                    if best.map_or(true, |(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else { break };
            let (left, right) = self.merges[rank].clone();
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(symbols[i].clone());
                    i += 1;
                }
            }
            symbols = merged;
        }

        symbols_to_pieces(&symbols)
    }

    /// Inverts [`encode_word`] on the pieces of a single word.
    pub fn decode_word(&self, pieces: &[String]) -> String {
        let mut word = String::new();
        for (i, piece) in pieces.iter().enumerate() {
            if i + 1 < pieces.len() {
                word.push_str(piece.strip_suffix(CONTINUATION).unwrap_or(piece));
            } else {
                word.push_str(piece);
            }
        }
        word
    }

    /// Groups a flat piece stream back into words via the `@@` continuation
    /// suffix and decodes each one.
    pub fn decode(&self, pieces: &[String]) -> Vec<String> {
        let mut words = Vec::new();
        let mut current = String::new();
        for piece in pieces {
            match piece.strip_suffix(CONTINUATION) {
                Some(head) => current.push_str(head),
                None => {
                    current.push_str(piece);
                    words.push(std::mem::take(&mut current));
                }
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
        words
    }

    /// Serializes the model: a `#merges` header, auxiliary `#`-prefixed
    /// header lines, then one `left right` line per merge in learned order.
    pub fn save<W: Write>(&self, writer: &mut W) -> Result<()> {
        writeln!(writer, "#merges {}", self.merges.len())?;
        if let Some(alphabet) = &self.alphabet {
            let chars: String = alphabet.iter().collect();
            writeln!(writer, "#alphabet {chars}")?;
        }
        for (left, right) in &self.merges {
            writeln!(writer, "{left} {right}")?;
        }
        Ok(())
    }

    /// Reads a model saved by [`save`]. Unrecognized `#` header lines are
    /// skipped; files without an alphabet header treat every character as
    /// known.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut alphabet: Option<BTreeSet<char>> = None;
        let mut merges: Vec<(String, String)> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(count) = rest.strip_prefix("merges ") {
                    declared = Some(count.trim().parse().map_err(|_| {
                        SegError::data(format!("bad #merges header: {line:?}"))
                    })?);
                } else if let Some(chars) = rest.strip_prefix("alphabet ") {
                    alphabet = Some(chars.chars().collect());
                }
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(left), Some(right), None) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(SegError::data(format!(
                    "line {}: expected \"left right\", got {line:?}",
                    lineno + 1
                )));
            };
            merges.push((left.to_string(), right.to_string()));
        }
        if let Some(count) = declared {
            if count != merges.len() {
                return Err(SegError::data(format!(
                    "header declares {count} merges but file has {}",
                    merges.len()
                )));
            }
        } else {
            return Err(SegError::data("missing #merges header"));
        }
        let merge_rank = rank_map(&merges);
        Ok(SubwordModel {
            merges,
            merge_rank,
            vocabulary: BTreeSet::new(),
            alphabet,
            unknown: UNKNOWN_TOKEN.to_string(),
        })
    }
}

fn symbols_to_pieces(symbols: &[String]) -> Vec<String> {
    let mut pieces = Vec::with_capacity(symbols.len());
    for (i, sym) in symbols.iter().enumerate() {
        if i + 1 < symbols.len() {
            pieces.push(format!("{sym}{CONTINUATION}"));
        } else {
            pieces.push(sym.strip_suffix(END_OF_WORD).unwrap_or(sym).to_string());
        }
    }
    pieces
}

fn rank_map(merges: &[(String, String)]) -> HashMap<(String, String), usize> {
    merges
        .iter()
        .enumerate()
        .map(|(rank, pair)| (pair.clone(), rank))
        .collect()
}

/// Trains a subword model on raw subtitle documents; tokenization matches
/// instance preparation (punctuation stripped, lowercased).
pub fn train_subwords(corpus: &[SubtitleDocument], merge_count: usize) -> Result<SubwordModel> {
    let punct = default_punct_set();
    let mut words: Vec<String> = Vec::new();
    for doc in corpus {
        let (tokens, _) = parse_subtitles(doc, &punct);
        words.extend(tokens);
    }
    train_subwords_from_words(words.iter().map(String::as_str), merge_count)
}

/// Trains a subword model from an already-tokenized word stream.
pub fn train_subwords_from_words<'a>(
    words: impl IntoIterator<Item = &'a str>,
    merge_count: usize,
) -> Result<SubwordModel> {
    // Word frequencies; BTreeMap keeps every later traversal deterministic.
    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    for word in words {
        if !word.is_empty() {
            *freq.entry(word.to_string()).or_insert(0) += 1;
        }
    }
    if freq.is_empty() {
        return Err(SegError::data("empty corpus"));
    }

    let mut alphabet: BTreeSet<char> = BTreeSet::new();
    for word in freq.keys() {
        alphabet.extend(word.chars());
    }

    // Symbol sequences per distinct word, weighted by frequency.
    let mut seqs: Vec<Vec<String>> = Vec::with_capacity(freq.len());
    let mut weights: Vec<u64> = Vec::with_capacity(freq.len());
    for (word, count) in &freq {
        let mut symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        symbols.last_mut().expect("non-empty").push_str(END_OF_WORD);
        seqs.push(symbols);
        weights.push(*count);
    }

    let mut pair_counts: HashMap<(String, String), i64> = HashMap::new();
    let mut pair_words: HashMap<(String, String), BTreeSet<usize>> = HashMap::new();
    for (idx, seq) in seqs.iter().enumerate() {
        for window in seq.windows(2) {
            let key = (window[0].clone(), window[1].clone());
            *pair_counts.entry(key.clone()).or_insert(0) += weights[idx] as i64;
            pair_words.entry(key).or_default().insert(idx);
        }
    }

    let mut merges: Vec<(String, String)> = Vec::new();
    while merges.len() < merge_count {
        // Highest count wins; ties go to the lexicographically smallest pair.
        let best = pair_counts
            .iter()
            .filter(|(_, &count)| count > 0)
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
            .map(|(pair, _)| pair.clone());
        let Some(pair) = best else { break };

        let members = pair_words.remove(&pair).unwrap_or_default();
        for idx in members {
            let old_seq = &seqs[idx];
            if !contains_pair(old_seq, &pair) {
                continue; // stale index from an earlier merge
            }
            let new_seq = merge_in_sequence(old_seq, &pair);
            let weight = weights[idx] as i64;
            for window in old_seq.windows(2) {
                let key = (window[0].clone(), window[1].clone());
                if let Some(count) = pair_counts.get_mut(&key) {
                    *count -= weight;
                    if *count <= 0 {
                        pair_counts.remove(&key);
                    }
                }
            }
            for window in new_seq.windows(2) {
                let key = (window[0].clone(), window[1].clone());
                *pair_counts.entry(key.clone()).or_insert(0) += weight;
                pair_words.entry(key).or_default().insert(idx);
            }
            seqs[idx] = new_seq;
        }
        pair_counts.remove(&pair);
        merges.push(pair);
    }

    let merge_rank = rank_map(&merges);
    let mut model = SubwordModel {
        merges,
        merge_rank,
        vocabulary: BTreeSet::new(),
        alphabet: Some(alphabet),
        unknown: UNKNOWN_TOKEN.to_string(),
    };
    let mut vocabulary: BTreeSet<String> = BTreeSet::new();
    for word in freq.keys() {
        vocabulary.extend(model.encode_word(word));
    }
    vocabulary.insert(model.unknown.clone());
    model.vocabulary = vocabulary;
    Ok(model)
}

fn contains_pair(seq: &[String], pair: &(String, String)) -> bool {
    seq.windows(2).any(|w| w[0] == pair.0 && w[1] == pair.1)
}

fn merge_in_sequence(seq: &[String], pair: &(String, String)) -> Vec<String> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == pair.0 && seq[i + 1] == pair.1 {
            out.push(format!("{}{}", pair.0, pair.1));
            i += 2;
        } else {
            out.push(seq[i].clone());
            i += 1;
        }
    }
    out
}

/// Expands a word-level instance to subword level. A word's boundary label
/// (and acoustic tag, when present) moves to its last piece; earlier pieces
/// get 0. Boundary counts are conserved.
pub fn encode_instance(inst: &Instance, model: &SubwordModel) -> Instance {
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let mut gamma = inst.gamma.as_ref().map(|_| Vec::new());
    for (i, word) in inst.tokens.iter().enumerate() {
        let pieces = model.encode_word(word);
        if pieces.is_empty() {
            continue;
        }
        let n = pieces.len();
        tokens.extend(pieces);
        labels.extend(std::iter::repeat(0).take(n - 1));
        labels.push(inst.labels[i]);
        if let (Some(out), Some(src)) = (gamma.as_mut(), inst.gamma.as_ref()) {
            out.extend(std::iter::repeat(0).take(n - 1));
            out.push(src[i]);
        }
    }
    Instance {
        doc_id: inst.doc_id.clone(),
        index: inst.index,
        tokens,
        gamma,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> SubtitleDocument {
        SubtitleDocument::new("d", vec![text.to_string()])
    }

    #[test]
    fn zero_merges_splits_to_characters() {
        let model = train_subwords(&[doc("ab cd.")], 0).unwrap();
        assert_eq!(model.merge_count(), 0);
        assert_eq!(model.encode_word("ab"), vec!["a@@", "b"]);
        assert_eq!(model.encode_word("cd"), vec!["c@@", "d"]);
    }

    #[test]
    fn single_merge_on_abab_is_a_b() {
        // Hand simulation: pairs (a,b), (b,a), (a,b</w>) all have count 2;
        // the lexicographic tie-break picks (a, b).
        let model = train_subwords(&[doc("abab abab")], 1).unwrap();
        assert_eq!(model.merges(), &[("a".to_string(), "b".to_string())]);
        assert_eq!(model.encode_word("abab"), vec!["ab@@", "a@@", "b"]);
    }

    #[test]
    fn roundtrip_identity_on_corpus_words() {
        let corpus = [doc("the market opened. the market closed! they say so.")];
        let model = train_subwords(&corpus, 8).unwrap();
        for word in ["the", "market", "opened", "closed", "they", "say", "so"] {
            let pieces = model.encode_word(word);
            assert_eq!(model.decode_word(&pieces), word, "pieces {pieces:?}");
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = train_subwords(&[], 10).unwrap_err();
        assert!(err.to_string().contains("empty corpus"));
    }

    #[test]
    fn fully_merged_word_is_a_single_piece() {
        let model = train_subwords(&[doc("aaaa aaaa aaaa")], 10).unwrap();
        assert_eq!(model.encode_word("aaaa"), vec!["aaaa"]);
    }

    #[test]
    fn unknown_characters_map_to_unknown_token() {
        let model = train_subwords(&[doc("ab ab")], 2).unwrap();
        assert_eq!(model.encode_word("xy"), vec![UNKNOWN_TOKEN.to_string()]);
    }

    #[test]
    fn save_load_preserves_encoding() {
        let corpus = [doc("the market opened. the market closed!")];
        let model = train_subwords(&corpus, 12).unwrap();
        let mut buf = Vec::new();
        model.save(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("#merges {}\n", model.merge_count())));
        let loaded = SubwordModel::load(&buf[..]).unwrap();
        assert_eq!(loaded.merges(), model.merges());
        for word in ["the", "market", "opened", "closed", "weird"] {
            assert_eq!(loaded.encode_word(word), model.encode_word(word));
        }
    }

    #[test]
    fn label_moves_to_last_piece() {
        let merges = vec![
            ("m".to_string(), "a".to_string()),
            ("ma".to_string(), "r".to_string()),
            ("k".to_string(), "e".to_string()),
            ("ke".to_string(), "t</w>".to_string()),
        ];
        let merge_rank = rank_map(&merges);
        let model = SubwordModel {
            merges,
            merge_rank,
            vocabulary: BTreeSet::new(),
            alphabet: None,
            unknown: UNKNOWN_TOKEN.to_string(),
        };
        assert_eq!(model.encode_word("market"), vec!["mar@@", "ket"]);

        let inst = Instance {
            doc_id: "d".into(),
            index: 0,
            tokens: vec!["market".into()],
            gamma: Some(vec![1]),
            labels: vec![1],
        };
        let encoded = encode_instance(&inst, &model);
        assert_eq!(encoded.tokens, vec!["mar@@", "ket"]);
        assert_eq!(encoded.labels, vec![0, 1]);
        assert_eq!(encoded.gamma, Some(vec![0, 1]));
    }

    #[test]
    fn encoding_conserves_boundary_count() {
        let corpus = [doc("some words here. market closes early! nothing else matters.")];
        let model = train_subwords(&corpus, 6).unwrap();
        let (tokens, labels) = parse_subtitles(&corpus[0], &default_punct_set());
        let inst = Instance {
            doc_id: "d".into(),
            index: 0,
            tokens,
            gamma: None,
            labels,
        };
        let encoded = encode_instance(&inst, &model);
        let before: u32 = inst.labels.iter().map(|&l| l as u32).sum();
        let after: u32 = encoded.labels.iter().map(|&l| l as u32).sum();
        assert_eq!(before, after);
        assert_eq!(encoded.tokens.len(), encoded.labels.len());
    }

    #[test]
    fn all_zero_labels_stay_zero() {
        let model = train_subwords(&[doc("alpha beta gamma")], 4).unwrap();
        let inst = Instance {
            doc_id: "d".into(),
            index: 0,
            tokens: vec!["alpha".into(), "beta".into()],
            gamma: None,
            labels: vec![0, 0],
        };
        let encoded = encode_instance(&inst, &model);
        assert!(encoded.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn flat_decode_recovers_words() {
        let model = train_subwords(&[doc("holiday market is busy")], 5).unwrap();
        let mut stream = Vec::new();
        for word in ["holiday", "market", "is", "busy"] {
            stream.extend(model.encode_word(word));
        }
        assert_eq!(model.decode(&stream), vec!["holiday", "market", "is", "busy"]);
    }
}
