//! Intrinsic and extrinsic evaluation: boundary precision/recall/F1,
//! document concatenation for external scoring, readability-based quartile
//! analysis, and the query-weighted-value retrieval metrics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Result, SegError};
use crate::resegment::SegmentedTranscript;

/// Position-exact boundary precision, recall and F1. When neither side has
/// any boundary, precision and recall are 1; a one-sided 0/0 is 0.
pub fn boundary_prf(pred: &[u8], gold: &[u8]) -> Result<(f64, f64, f64)> {
    if pred.len() != gold.len() {
        return Err(SegError::data(format!(
            "prediction length {} does not match gold length {}",
            pred.len(),
            gold.len()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let both_empty = tp + fp == 0 && tp + fn_ == 0;
    let precision = if tp + fp == 0 {
        if both_empty {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        if both_empty {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

/// Space-joined, lowercased token stream of the whole transcript, ignoring
/// segment boundaries. Downstream document-level scorers consume this.
pub fn concat_document(transcript: &SegmentedTranscript) -> String {
    let mut out = String::new();
    for segment in &transcript.segments {
        for token in &segment.tokens {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&token.to_lowercase());
        }
    }
    out
}

/// Parameters for the query-weighted-value metrics.
#[derive(Debug, Clone)]
pub struct QwvParams {
    /// False-alarm weight.
    pub beta: f64,
}

impl Default for QwvParams {
    fn default() -> Self {
        Self { beta: 40.0 }
    }
}

/// A ranked retrieval run: per query, (doc_id, score) sorted by descending
/// score.
#[derive(Debug, Clone, Default)]
pub struct RetrievalRun {
    pub queries: BTreeMap<String, Vec<(String, f64)>>,
}

/// Binary relevance judgments plus the judged collection size.
#[derive(Debug, Clone, Default)]
pub struct RelevanceJudgments {
    pub relevant: BTreeMap<String, BTreeSet<String>>,
    pub collection_size: usize,
}

/// Query weighted value for one query: `1 - (P_miss + beta * P_falsealarm)`
/// with the top `k_cutoff` documents retrieved.
pub fn qwv(
    ranking: &[(String, f64)],
    relevant: &BTreeSet<String>,
    collection_size: usize,
    k_cutoff: usize,
    beta: f64,
) -> Result<f64> {
    if relevant.is_empty() {
        return Err(SegError::data("qwv needs at least one relevant document"));
    }
    if collection_size <= relevant.len() {
        return Err(SegError::data(format!(
            "collection size {collection_size} must exceed the {} relevant documents",
            relevant.len()
        )));
    }
    let k = k_cutoff.min(ranking.len());
    let retrieved: HashSet<&str> = ranking[..k].iter().map(|(d, _)| d.as_str()).collect();
    qwv_of_retrieved(&retrieved, relevant, collection_size, beta)
}

fn qwv_of_retrieved(
    retrieved: &HashSet<&str>,
    relevant: &BTreeSet<String>,
    collection_size: usize,
    beta: f64,
) -> Result<f64> {
    let hits = relevant
        .iter()
        .filter(|d| retrieved.contains(d.as_str()))
        .count();
    let misses = relevant.len() - hits;
    let false_alarms = retrieved.len() - hits;
    let p_miss = misses as f64 / relevant.len() as f64;
    let p_fa = false_alarms as f64 / (collection_size - relevant.len()) as f64;
    Ok(1.0 - (p_miss + beta * p_fa))
}

/// Scored queries: those present in the run, judged, with at least one
/// relevant document. Queries with no relevant documents are skipped.
fn scoreable_queries<'a>(
    run: &'a RetrievalRun,
    judgments: &'a RelevanceJudgments,
) -> Vec<(&'a str, &'a Vec<(String, f64)>, &'a BTreeSet<String>)> {
    run.queries
        .iter()
        .filter_map(|(qid, ranking)| {
            let relevant = judgments.relevant.get(qid)?;
            if relevant.is_empty() {
                return None;
            }
            Some((qid.as_str(), ranking, relevant))
        })
        .collect()
}

/// Mean QWV over queries at a fixed global score threshold: each query
/// retrieves the documents scoring at or above `threshold`.
pub fn aqwv_at_threshold(
    run: &RetrievalRun,
    judgments: &RelevanceJudgments,
    params: &QwvParams,
    threshold: f64,
) -> Result<f64> {
    let queries = scoreable_queries(run, judgments);
    if queries.is_empty() {
        return Err(SegError::data("no scoreable queries in the run"));
    }
    let mut total = 0.0;
    for (_, ranking, relevant) in &queries {
        let retrieved: HashSet<&str> = ranking
            .iter()
            .filter(|(_, s)| *s >= threshold)
            .map(|(d, _)| d.as_str())
            .collect();
        total += qwv_of_retrieved(&retrieved, relevant, judgments.collection_size, params.beta)?;
    }
    Ok(total / queries.len() as f64)
}

/// Maximum query weighted value: the best mean QWV over every global score
/// threshold. Only the ordering of scores matters. Each candidate threshold
/// sits at a distinct score; retrieved counts are tracked as integers and
/// the mean is recomputed from them, so equal retrieved sets always produce
/// bit-identical values.
pub fn mqwv(
    run: &RetrievalRun,
    judgments: &RelevanceJudgments,
    params: &QwvParams,
) -> Result<f64> {
    let queries = scoreable_queries(run, judgments);
    if queries.is_empty() {
        return Err(SegError::data("no scoreable queries in the run"));
    }
    let n = judgments.collection_size;
    let beta = params.beta;

    let mut events: Vec<(f64, usize, bool)> = Vec::new(); // (score, query idx, is_relevant)
    for (idx, (_, ranking, relevant)) in queries.iter().enumerate() {
        for (doc, score) in ranking.iter() {
            if !score.is_finite() {
                return Err(SegError::data(format!("non-finite score for {doc:?}")));
            }
            events.push((*score, idx, relevant.contains(doc)));
        }
        if n <= relevant.len() {
            return Err(SegError::data(format!(
                "collection size {n} must exceed the {} relevant documents",
                relevant.len()
            )));
        }
    }
    events.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut hits = vec![0usize; queries.len()];
    let mut false_alarms = vec![0usize; queries.len()];
    let mean = |hits: &[usize], false_alarms: &[usize]| {
        let mut total = 0.0;
        for (idx, (_, _, relevant)) in queries.iter().enumerate() {
            let misses = relevant.len() - hits[idx];
            let p_miss = misses as f64 / relevant.len() as f64;
            let p_fa = false_alarms[idx] as f64 / (n - relevant.len()) as f64;
            total += 1.0 - (p_miss + beta * p_fa);
        }
        total / queries.len() as f64
    };

    let mut best = mean(&hits, &false_alarms); // the empty retrieved set
    let mut i = 0;
    while i < events.len() {
        // Apply every document sharing this score before reading the mean:
        // a threshold at this score retrieves all of them.
        let score = events[i].0;
        while i < events.len() && events[i].0 == score {
            let (_, q, is_relevant) = events[i];
            if is_relevant {
                hits[q] += 1;
            } else {
                false_alarms[q] += 1;
            }
            i += 1;
        }
        let value = mean(&hits, &false_alarms);
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

/// Rank-cutoff variant: the threshold is a per-query rank depth shared by
/// all queries instead of a score.
pub fn mqwv_rank_sweep(
    run: &RetrievalRun,
    judgments: &RelevanceJudgments,
    params: &QwvParams,
) -> Result<f64> {
    let queries = scoreable_queries(run, judgments);
    if queries.is_empty() {
        return Err(SegError::data("no scoreable queries in the run"));
    }
    let max_depth = queries.iter().map(|(_, r, _)| r.len()).max().unwrap_or(0);
    let mut best = f64::NEG_INFINITY;
    for k in 0..=max_depth {
        let mut total = 0.0;
        for (_, ranking, relevant) in &queries {
            total += qwv(ranking, relevant, judgments.collection_size, k, params.beta)?;
        }
        best = best.max(total / queries.len() as f64);
    }
    Ok(best)
}

/// Counts feeding the readability score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextStats {
    pub characters: usize,
    pub words: usize,
    pub sentences: usize,
}

/// Counts alphanumeric characters and words over sentence-like segments.
pub fn text_stats<'a>(segments: impl IntoIterator<Item = &'a str>) -> TextStats {
    let mut characters = 0;
    let mut words = 0;
    let mut sentences = 0;
    for segment in segments {
        let mut segment_words = 0;
        for word in segment.split_whitespace() {
            segment_words += 1;
            characters += word.chars().filter(|c| c.is_alphanumeric()).count();
        }
        if segment_words > 0 {
            words += segment_words;
            sentences += 1;
        }
    }
    TextStats {
        characters,
        words,
        sentences,
    }
}

/// Automated readability index from raw counts.
pub fn ari_from_stats(stats: TextStats) -> Result<f64> {
    if stats.words == 0 || stats.sentences == 0 {
        return Err(SegError::data(
            "ARI needs at least one word and one sentence",
        ));
    }
    Ok(4.71 * (stats.characters as f64 / stats.words as f64)
        + 0.5 * (stats.words as f64 / stats.sentences as f64)
        - 21.43)
}

/// ARI of a corrected transcript; each segment counts as one sentence.
pub fn ari(transcript: &SegmentedTranscript) -> Result<f64> {
    let segments: Vec<String> = transcript
        .segments
        .iter()
        .map(|s| s.tokens.join(" "))
        .collect();
    ari_from_stats(text_stats(segments.iter().map(String::as_str)))
}

/// Sorts documents by score ascending and splits them into four contiguous
/// buckets whose sizes differ by at most one, extra documents going to the
/// lower quartiles. The last bucket holds the highest scores.
pub fn quartile_split(docs: &[(String, f64)]) -> Result<[Vec<(String, f64)>; 4]> {
    if docs.len() < 4 {
        return Err(SegError::data(format!(
            "quartile split needs at least 4 documents, got {}",
            docs.len()
        )));
    }
    let mut sorted = docs.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let n = sorted.len();
    let base = n / 4;
    let extra = n % 4;
    let mut buckets: [Vec<(String, f64)>; 4] = Default::default();
    let mut it = sorted.into_iter();
    for (i, bucket) in buckets.iter_mut().enumerate() {
        let size = base + usize::from(i < extra);
        bucket.extend(it.by_ref().take(size));
    }
    Ok(buckets)
}

/// Parses qrels lines: `query_id 0 doc_id rel` with binary relevance. The
/// collection size is the number of distinct judged documents.
pub fn parse_qrels<R: BufRead>(reader: R) -> Result<RelevanceJudgments> {
    let mut relevant: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut judged: BTreeSet<String> = BTreeSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(SegError::data(format!(
                "qrels line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let rel: u8 = fields[3].parse().map_err(|_| {
            SegError::data(format!("qrels line {}: bad relevance {:?}", lineno + 1, fields[3]))
        })?;
        if rel > 1 {
            return Err(SegError::data(format!(
                "qrels line {}: relevance must be 0 or 1",
                lineno + 1
            )));
        }
        judged.insert(fields[2].to_string());
        let entry = relevant.entry(fields[0].to_string()).or_default();
        if rel == 1 {
            entry.insert(fields[2].to_string());
        }
    }
    Ok(RelevanceJudgments {
        relevant,
        collection_size: judged.len(),
    })
}

/// Parses run lines: `query_id Q0 doc_id rank score tag`. Rankings come out
/// sorted by descending score.
pub fn parse_run<R: BufRead>(reader: R) -> Result<RetrievalRun> {
    let mut queries: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(SegError::data(format!(
                "run line {}: expected 6 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let score: f64 = fields[4].parse().map_err(|_| {
            SegError::data(format!("run line {}: bad score {:?}", lineno + 1, fields[4]))
        })?;
        if !score.is_finite() {
            return Err(SegError::data(format!(
                "run line {}: score must be finite",
                lineno + 1
            )));
        }
        if !seen.insert((fields[0].to_string(), fields[2].to_string())) {
            return Err(SegError::data(format!(
                "run line {}: duplicate document {} for query {}",
                lineno + 1,
                fields[2],
                fields[0]
            )));
        }
        queries
            .entry(fields[0].to_string())
            .or_default()
            .push((fields[2].to_string(), score));
    }
    for ranking in queries.values_mut() {
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    }
    Ok(RetrievalRun { queries })
}

/// The JSON metric report emitted by the retrieval evaluation command.
#[derive(Debug, Serialize)]
pub struct RetrievalReport {
    pub aqwv_at_threshold: f64,
    pub threshold: f64,
    pub mqwv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mqwv_rank_sweep: Option<f64>,
    pub per_query: BTreeMap<String, f64>,
}

/// Evaluates a run against judgments, reporting AQWV at the given threshold
/// (with per-query values) and MQWV.
pub fn evaluate_retrieval(
    run: &RetrievalRun,
    judgments: &RelevanceJudgments,
    params: &QwvParams,
    threshold: f64,
    rank_sweep: bool,
) -> Result<RetrievalReport> {
    let queries = scoreable_queries(run, judgments);
    if queries.is_empty() {
        return Err(SegError::data("no scoreable queries in the run"));
    }
    let mut per_query = BTreeMap::new();
    for (qid, ranking, relevant) in &queries {
        let retrieved: HashSet<&str> = ranking
            .iter()
            .filter(|(_, s)| *s >= threshold)
            .map(|(d, _)| d.as_str())
            .collect();
        per_query.insert(
            qid.to_string(),
            qwv_of_retrieved(&retrieved, relevant, judgments.collection_size, params.beta)?,
        );
    }
    Ok(RetrievalReport {
        aqwv_at_threshold: aqwv_at_threshold(run, judgments, params, threshold)?,
        threshold,
        mqwv: mqwv(run, judgments, params)?,
        mqwv_rank_sweep: rank_sweep
            .then(|| mqwv_rank_sweep(run, judgments, params))
            .transpose()?,
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resegment::Segment;

    #[test]
    fn prf_hand_count() {
        let (p, r, f1) = boundary_prf(&[1, 0, 1], &[1, 1, 0]).unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(r, 0.5);
        assert_eq!(f1, 0.5);
    }

    #[test]
    fn prf_identity_and_zeros() {
        let (p, r, f1) = boundary_prf(&[0, 1, 0], &[0, 1, 0]).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));

        let (_, r, f1) = boundary_prf(&[0, 0, 0], &[1, 1, 0]).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(f1, 0.0);

        let (p, r, f1) = boundary_prf(&[0, 0], &[0, 0]).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));

        assert!(boundary_prf(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn prf_is_symmetric_in_f1() {
        let a = [1, 0, 1, 0, 0, 1];
        let b = [0, 0, 1, 1, 0, 1];
        let (_, _, f_ab) = boundary_prf(&a, &b).unwrap();
        let (_, _, f_ba) = boundary_prf(&b, &a).unwrap();
        assert_eq!(f_ab, f_ba);
    }

    fn transcript(segments: &[&[&str]]) -> SegmentedTranscript {
        SegmentedTranscript {
            doc_id: "doc".into(),
            channel: None,
            segments: segments
                .iter()
                .enumerate()
                .map(|(i, tokens)| Segment {
                    tokens: tokens.iter().map(|t| t.to_string()).collect(),
                    start: i as f64,
                })
                .collect(),
        }
    }

    #[test]
    fn concat_lowercases_and_joins() {
        let t = transcript(&[&["NO"], &["IS", "HE", "IN", "SOME", "KIND", "OF", "TROUBLE"]]);
        assert_eq!(concat_document(&t), "no is he in some kind of trouble");
        assert_eq!(concat_document(&transcript(&[])), "");
    }

    #[test]
    fn concat_ignores_segmentation() {
        let one = transcript(&[&["a", "b", "c", "d"]]);
        let two = transcript(&[&["a"], &["b", "c"], &["d"]]);
        assert_eq!(concat_document(&one), concat_document(&two));
    }

    fn rel(docs: &[&str]) -> BTreeSet<String> {
        docs.iter().map(|d| d.to_string()).collect()
    }

    fn ranking(docs: &[(&str, f64)]) -> Vec<(String, f64)> {
        docs.iter().map(|(d, s)| (d.to_string(), *s)).collect()
    }

    #[test]
    fn qwv_worked_example() {
        // 10 judged docs, 2 relevant, top-3 contains 1 relevant:
        // 1 - (1/2 + 40 * 2/8) = -9.5 exactly.
        let r = ranking(&[("d1", 0.9), ("x1", 0.8), ("x2", 0.7), ("d2", 0.1)]);
        let value = qwv(&r, &rel(&["d1", "d2"]), 10, 3, 40.0).unwrap();
        assert_eq!(value, -9.5);
    }

    #[test]
    fn qwv_extremes() {
        let r = ranking(&[("d1", 0.9), ("d2", 0.8), ("x1", 0.1)]);
        let relevant = rel(&["d1", "d2"]);
        assert_eq!(qwv(&r, &relevant, 10, 0, 40.0).unwrap(), 0.0);
        assert_eq!(qwv(&r, &relevant, 10, 2, 40.0).unwrap(), 1.0);
        assert!(qwv(&r, &relevant, 2, 1, 40.0).is_err());
    }

    fn judgments(pairs: &[(&str, &[&str])], collection_size: usize) -> RelevanceJudgments {
        RelevanceJudgments {
            relevant: pairs
                .iter()
                .map(|(q, docs)| (q.to_string(), rel(docs)))
                .collect(),
            collection_size,
        }
    }

    #[test]
    fn mqwv_perfect_ranking_scores_one() {
        let run = RetrievalRun {
            queries: [(
                "q1".to_string(),
                ranking(&[("d1", 0.9), ("d2", 0.8), ("x1", 0.2)]),
            )]
            .into(),
        };
        let j = judgments(&[("q1", &["d1", "d2"])], 10);
        assert_eq!(mqwv(&run, &j, &QwvParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn mqwv_dominates_any_fixed_threshold() {
        let run = RetrievalRun {
            queries: [
                ("q1".to_string(), ranking(&[("d1", 0.9), ("x1", 0.5), ("d2", 0.3)])),
                ("q2".to_string(), ranking(&[("x2", 0.7), ("d3", 0.6)])),
            ]
            .into(),
        };
        let j = judgments(&[("q1", &["d1", "d2"]), ("q2", &["d3"])], 12);
        let params = QwvParams::default();
        let best = mqwv(&run, &j, &params).unwrap();
        for threshold in [-1.0, 0.0, 0.3, 0.5, 0.6, 0.65, 0.9, 1.5] {
            let fixed = aqwv_at_threshold(&run, &j, &params, threshold).unwrap();
            assert!(best >= fixed - 1e-12, "threshold {threshold}: {fixed} > {best}");
        }
    }

    #[test]
    fn mqwv_skips_queries_without_relevant_documents() {
        let run = RetrievalRun {
            queries: [
                ("q1".to_string(), ranking(&[("d1", 0.9)])),
                ("q2".to_string(), ranking(&[("x1", 0.8)])),
            ]
            .into(),
        };
        let j = judgments(&[("q1", &["d1"]), ("q2", &[])], 10);
        assert_eq!(mqwv(&run, &j, &QwvParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn ari_formula_example() {
        // 2 segments, 7 words, 20 alphanumeric characters.
        let stats = text_stats(["this is a test", "it is short"]);
        assert_eq!(
            stats,
            TextStats {
                characters: 20,
                words: 7,
                sentences: 2
            }
        );
        let value = ari_from_stats(stats).unwrap();
        let expected = 4.71 * (20.0 / 7.0) + 0.5 * (7.0 / 2.0) - 21.43;
        assert!((value - expected).abs() < 1e-12);
        assert!((value - -6.22).abs() < 0.01);
    }

    #[test]
    fn ari_is_ratio_invariant_and_monotone_in_characters() {
        let base = TextStats {
            characters: 20,
            words: 7,
            sentences: 2,
        };
        let doubled = TextStats {
            characters: 40,
            words: 14,
            sentences: 4,
        };
        assert!((ari_from_stats(base).unwrap() - ari_from_stats(doubled).unwrap()).abs() < 1e-12);

        let longer_words = TextStats {
            characters: 30,
            words: 7,
            sentences: 2,
        };
        assert!(ari_from_stats(longer_words).unwrap() > ari_from_stats(base).unwrap());

        assert!(ari_from_stats(TextStats {
            characters: 0,
            words: 0,
            sentences: 1
        })
        .is_err());
    }

    fn docs(n: usize) -> Vec<(String, f64)> {
        (0..n).map(|i| (format!("d{i}"), i as f64)).collect()
    }

    #[test]
    fn quartiles_have_balanced_sizes() {
        let buckets = quartile_split(&docs(8)).unwrap();
        assert_eq!(buckets.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 2, 2]);
        let buckets = quartile_split(&docs(9)).unwrap();
        assert_eq!(buckets.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2, 2, 2]);
        assert!(quartile_split(&docs(3)).is_err());
    }

    #[test]
    fn quartiles_are_ordered() {
        let buckets = quartile_split(&docs(10)).unwrap();
        for i in 0..3 {
            let max_here = buckets[i].iter().map(|(_, s)| *s).fold(f64::MIN, f64::max);
            let min_next = buckets[i + 1].iter().map(|(_, s)| *s).fold(f64::MAX, f64::min);
            assert!(max_here <= min_next);
        }
    }

    #[test]
    fn qrels_and_run_files_parse() {
        let qrels = "q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 1\n";
        let j = parse_qrels(qrels.as_bytes()).unwrap();
        assert_eq!(j.collection_size, 3);
        assert_eq!(j.relevant["q1"], rel(&["d1"]));

        let run = "q1 Q0 d1 1 0.9 tag\nq1 Q0 d2 2 0.401 tag\nq2 Q0 d3 1 0.87 tag\n";
        let r = parse_run(run.as_bytes()).unwrap();
        assert_eq!(r.queries["q1"].len(), 2);
        assert_eq!(r.queries["q1"][0].0, "d1");

        assert!(parse_run("q1 Q0 d1 1 0.9 t\nq1 Q0 d1 2 0.8 t\n".as_bytes()).is_err());
        assert!(parse_qrels("q1 0 d1 5\n".as_bytes()).is_err());
    }
}
